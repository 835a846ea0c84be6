#include "eraser/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "eraser/data_forge.hpp"
#include "eraser/errors.hpp"
#include "eraser/optim.hpp"
#include "eraser/rng.hpp"
#include "json_adapters.hpp"

namespace eraser {

using nn::Mat;
using nn::Tape;
using nlohmann::json;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::eraser: return "eraser";
        case Variant::eraser_no_T: return "eraser_no_T";
        case Variant::eraser_no_Lh: return "eraser_no_Lh";
        case Variant::eraser_no_Lr: return "eraser_no_Lr";
        case Variant::ga_only: return "ga_only";
        case Variant::ga_random: return "ga_random";
        case Variant::eraser_random: return "eraser_random";
        case Variant::rsft: return "rsft";
    }
    throw std::logic_error("variant_name: bad variant");
}

Variant variant_from_name(const std::string& name) {
    static const std::pair<const char*, Variant> kAll[] = {
        {"eraser", Variant::eraser},
        {"eraser_no_T", Variant::eraser_no_T},
        {"eraser_no_Lh", Variant::eraser_no_Lh},
        {"eraser_no_Lr", Variant::eraser_no_Lr},
        {"ga_only", Variant::ga_only},
        {"ga_random", Variant::ga_random},
        {"eraser_random", Variant::eraser_random},
        {"rsft", Variant::rsft},
    };
    for (const auto& [n, v] : kAll) {
        if (name == n) return v;
    }
    throw ConfigError("unknown variant: " + name);
}

bool variant_uses_augmentation(Variant v) { return v != Variant::eraser_no_T; }

bool variant_uses_helpful(Variant v) {
    return v == Variant::eraser || v == Variant::eraser_no_T || v == Variant::eraser_no_Lr ||
           v == Variant::eraser_random;
}

bool variant_uses_refusal(Variant v) {
    return v == Variant::eraser || v == Variant::eraser_no_T || v == Variant::eraser_no_Lh ||
           v == Variant::eraser_random;
}

bool variant_uses_random_targets(Variant v) {
    return v == Variant::ga_random || v == Variant::eraser_random;
}

bool variant_is_gradient_ascent_only(Variant v) {
    return v == Variant::ga_only || v == Variant::ga_random;
}

void TrainConfig::validate() const {
    if (gamma <= 0.0) throw ConfigError("TrainConfig: gamma must be positive");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be positive");
    if (adapter_rank < 1) throw ConfigError("TrainConfig: adapter_rank must be >= 1");
    if (max_seq_len < 8) throw ConfigError("TrainConfig: max_seq_len too small");
    if (aug_prefix_min < 0 || aug_prefix_max < aug_prefix_min || aug_suffix_min < 0 ||
        aug_suffix_max < aug_suffix_min) {
        throw ConfigError("TrainConfig: invalid augmentation ranges");
    }
    for (double w : term_weights) {
        if (w < 0.0) throw ConfigError("TrainConfig: term weights must be nonnegative");
    }
    if (variant == Variant::rsft && rsft_refusal_target.empty()) {
        throw ConfigError("TrainConfig: rsft needs a refusal target");
    }
}

namespace {

struct ForgetItem {
    TokenSeq x;  // raw prompt tokens, no separator
    TokenSeq y;  // response tokens + eos
};

struct RetentionItem {
    TokenPair pair;
    Mat teacher_rows;
};

std::vector<int> shuffled_indices(size_t n, uint64_t seed) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (size_t i = n; i > 1; --i) {
        const size_t j = rng.below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

void write_diagnostic_snapshot(const std::filesystem::path& run_dir, int step, int epoch,
                               const LossBreakdown& b, double objective) {
    json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["loss"] = b;
    j["objective"] = objective;
    std::ofstream out(run_dir / "diagnostic.json");
    out << j.dump(2) << '\n';
}

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, int epoch) {
    return run_dir / "checkpoints" / ("epoch-" + std::to_string(epoch));
}

}  // namespace

void save_loss_log(const std::vector<StepRecord>& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& rec : log) {
        json j;
        j["step"] = rec.step;
        j["epoch"] = rec.epoch;
        j["loss"] = rec.loss;
        j["objective"] = rec.objective;
        out << j.dump() << '\n';
    }
}

std::vector<StepRecord> load_loss_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<StepRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        StepRecord rec;
        rec.step = j.at("step").get<int>();
        rec.epoch = j.at("epoch").get<int>();
        rec.loss = j.at("loss").get<LossBreakdown>();
        rec.objective = j.at("objective").get<double>();
        out.push_back(std::move(rec));
    }
    return out;
}

RunArtifact train(const TrainConfig& cfg, const TriCorpora& corpora, const ToyModel& base,
                  const CharTokenizer& tok, const std::filesystem::path& run_dir, bool resume) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    if (corpora.forget.role != Role::harmful || corpora.helpful.role != Role::helpful ||
        corpora.refusal.role != Role::refusal) {
        throw ConfigError("train: corpus roles are mislabelled");
    }
    if (corpora.forget.empty()) throw ConfigError("train: forget corpus is empty");
    if (variant_uses_helpful(cfg.variant) && corpora.helpful.empty()) {
        throw ConfigError("train: variant " + variant_name(cfg.variant) +
                          " requires a helpful corpus");
    }
    if (variant_uses_refusal(cfg.variant) && corpora.refusal.empty()) {
        throw ConfigError("train: variant " + variant_name(cfg.variant) +
                          " requires a refusal corpus");
    }

    std::filesystem::create_directories(run_dir / "checkpoints");

    const int cap = std::min(cfg.max_seq_len, base.cfg.max_seq_len);

    // Random-token sampling domain; also used by the *_random substitutions.
    AugmentationSpec aug_spec = AugmentationSpec::for_tokenizer(
        tok, cfg.aug_prefix_min, cfg.aug_prefix_max, cfg.aug_suffix_min, cfg.aug_suffix_max,
        cfg.seeds.augment);
    const AugmentationSpec identity_spec = AugmentationSpec::identity(cfg.seeds.augment);

    Corpus forget = corpora.forget;
    if (variant_uses_random_targets(cfg.variant)) {
        AugmentationSpec sub_spec = aug_spec;
        sub_spec.epoch_seed_base = cfg.seeds.data;
        forget = substitute_random_answers(forget, sub_spec, cfg.seeds.data, tok);
    }
    if (cfg.variant == Variant::rsft) {
        for (auto& item : forget.items) item.response = cfg.rsft_refusal_target;
    }

    std::vector<ForgetItem> fitems;
    fitems.reserve(forget.items.size());
    for (const auto& item : forget.items) {
        ForgetItem fi;
        fi.x = tok.encode(item.prompt);
        if (fi.x.empty()) throw ConfigError("train: forget prompt encodes to nothing");
        fi.y = tok.encode(item.response);
        fi.y.push_back(CharTokenizer::kEos);
        fitems.push_back(std::move(fi));
    }

    const ModelHandle teacher = ModelHandle::teacher(base);

    // The teacher is frozen, so its next-token distributions on the fixed
    // retention pairs are computed once.
    auto prep_retention = [&](const Corpus& c) {
        std::vector<RetentionItem> items;
        items.reserve(c.items.size());
        for (const auto& item : c.items) {
            RetentionItem ri;
            ri.pair = encode_qa(tok, item.prompt, item.response);
            truncate_pair(ri.pair, cap);
            ri.teacher_rows = teacher_response_log_probs(teacher, ri.pair.prompt, ri.pair.target);
            items.push_back(std::move(ri));
        }
        return items;
    };
    std::vector<RetentionItem> hitems;
    std::vector<RetentionItem> ritems;
    if (variant_uses_helpful(cfg.variant)) hitems = prep_retention(corpora.helpful);
    if (variant_uses_refusal(cfg.variant)) ritems = prep_retention(corpora.refusal);

    AdapterConfig acfg;
    acfg.rank = cfg.adapter_rank;
    acfg.alpha = cfg.adapter_alpha;
    acfg.init_seed = cfg.seeds.init;
    AdapterSet adapters(base.cfg, acfg);

    AdamWConfig ocfg;
    ocfg.lr = cfg.learning_rate;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(ocfg, adapters.params.scalar_count());

    RunArtifact run;
    run.config = cfg;
    run.run_dir = run_dir;

    int start_epoch = 0;
    if (resume) {
        int last = -1;
        for (int e = 0; e < cfg.epochs; ++e) {
            if (std::filesystem::exists(checkpoint_dir(run_dir, e) / "adapters.bin")) last = e;
        }
        if (last >= 0) {
            adapters = AdapterSet::load(base.cfg, checkpoint_dir(run_dir, last) / "adapters.bin");
            opt = AdamW::load(ocfg, checkpoint_dir(run_dir, last) / "optimizer.bin");
            auto prior = load_loss_log(run_dir / "losses.jsonl");
            for (auto& rec : prior) {
                if (rec.epoch <= last) run.loss_log.push_back(std::move(rec));
            }
            start_epoch = last + 1;
        }
    }

    const ModelHandle student = ModelHandle::student(base, adapters);

    size_t max_active = fitems.size();
    if (variant_uses_helpful(cfg.variant)) max_active = std::max(max_active, hitems.size());
    if (variant_uses_refusal(cfg.variant)) max_active = std::max(max_active, ritems.size());
    const int steps_per_epoch =
        static_cast<int>((max_active + static_cast<size_t>(cfg.batch_size) - 1) /
                         static_cast<size_t>(cfg.batch_size));

    const bool ga_only = variant_is_gradient_ascent_only(cfg.variant);
    const bool is_rsft = cfg.variant == Variant::rsft;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const AugmentationSpec& spec_used =
            variant_uses_augmentation(cfg.variant) ? aug_spec : identity_spec;
        const AugmentFn augfn = epoch_augmenter(spec_used, epoch);

        const auto perm_f = shuffled_indices(fitems.size(), mix_seed(cfg.seeds.data, epoch, 0x46));
        const auto perm_h = shuffled_indices(hitems.size(), mix_seed(cfg.seeds.data, epoch, 0x48));
        const auto perm_r = shuffled_indices(ritems.size(), mix_seed(cfg.seeds.data, epoch, 0x52));

        for (int s = 0; s < steps_per_epoch; ++s) {
            Tape tape(/*grad_enabled=*/true);

            std::vector<TokenPair> fbatch;
            fbatch.reserve(static_cast<size_t>(cfg.batch_size));
            for (int j = 0; j < cfg.batch_size; ++j) {
                const size_t pos = (static_cast<size_t>(s) * cfg.batch_size + j) % fitems.size();
                const int gi = perm_f[pos];
                const ForgetItem& fi = fitems[static_cast<size_t>(gi)];
                TokenPair pair;
                pair.prompt = augfn(fi.x, gi);
                pair.prompt.push_back(CharTokenizer::kSep);
                pair.target = fi.y;
                truncate_pair(pair, cap);
                fbatch.push_back(std::move(pair));
            }
            Tape::Ref lf_node = unlearn_loss_graph(tape, student, fbatch);
            const double lf = tape.value(lf_node).v[0];

            auto retention_batch = [&](const std::vector<RetentionItem>& items,
                                       const std::vector<int>& perm) {
                std::vector<TokenPair> batch;
                std::vector<Mat> rows;
                for (int j = 0; j < cfg.batch_size; ++j) {
                    const size_t pos = (static_cast<size_t>(s) * cfg.batch_size + j) % items.size();
                    const auto& it = items[static_cast<size_t>(perm[pos])];
                    batch.push_back(it.pair);
                    rows.push_back(it.teacher_rows);
                }
                return retention_loss_graph(tape, student, batch, rows);
            };

            double lh = 0.0, lr = 0.0;
            Tape::Ref lh_node{}, lr_node{};
            if (variant_uses_helpful(cfg.variant)) {
                lh_node = retention_batch(hitems, perm_h);
                lh = tape.value(lh_node).v[0];
            }
            if (variant_uses_refusal(cfg.variant)) {
                lr_node = retention_batch(ritems, perm_r);
                lr = tape.value(lr_node).v[0];
            }

            Tape::Ref objective{};
            if (ga_only) {
                objective = lf_node;
            } else if (is_rsft) {
                // Plain SFT cross-entropy towards the refusal target.
                objective = tape.scale(lf_node, -1.0);
            } else {
                Tape::Ref hinge = tape.relu(tape.add_scalar(lf_node, cfg.gamma));
                Tape::Ref total = tape.scale(hinge, cfg.term_weights[0]);
                if (lh_node.valid()) total = tape.add(total, tape.scale(lh_node, cfg.term_weights[1]));
                if (lr_node.valid()) total = tape.add(total, tape.scale(lr_node, cfg.term_weights[2]));
                objective = total;
            }

            StepRecord rec;
            rec.step = static_cast<int>(run.loss_log.size());
            rec.epoch = epoch;
            rec.loss = combined_loss(lf, lh, lr, cfg.gamma, cfg.term_weights);
            rec.objective = tape.value(objective).v[0];

            if (!std::isfinite(rec.objective) || !std::isfinite(rec.loss.total)) {
                write_diagnostic_snapshot(run_dir, rec.step, epoch, rec.loss, rec.objective);
                throw TrainingError("train: non-finite loss at step " + std::to_string(rec.step) +
                                    "; diagnostic snapshot written");
            }

            base.params.zero_grads();
            adapters.params.zero_grads();
            tape.backward(objective);
            opt.step(adapters.params);

            run.loss_log.push_back(rec);
        }

        const auto dir = checkpoint_dir(run_dir, epoch);
        std::filesystem::create_directories(dir);
        adapters.save(dir / "adapters.bin");
        opt.save(dir / "optimizer.bin");
        run.checkpoint_epochs.push_back(epoch);
    }

    // Include epochs restored from a resumed log.
    run.checkpoint_epochs.clear();
    for (int e = 0; e < cfg.epochs; ++e) {
        if (std::filesystem::exists(checkpoint_dir(run_dir, e) / "adapters.bin")) {
            run.checkpoint_epochs.push_back(e);
        }
    }

    run.epoch_mean_total.assign(static_cast<size_t>(cfg.epochs), 0.0);
    run.epoch_mean_lf.assign(static_cast<size_t>(cfg.epochs), 0.0);
    run.epoch_mean_objective.assign(static_cast<size_t>(cfg.epochs), 0.0);
    std::vector<int> counts(static_cast<size_t>(cfg.epochs), 0);
    for (const auto& rec : run.loss_log) {
        run.epoch_mean_total[static_cast<size_t>(rec.epoch)] += rec.loss.total;
        run.epoch_mean_lf[static_cast<size_t>(rec.epoch)] += rec.loss.l_f;
        run.epoch_mean_objective[static_cast<size_t>(rec.epoch)] += rec.objective;
        ++counts[static_cast<size_t>(rec.epoch)];
    }
    for (int e = 0; e < cfg.epochs; ++e) {
        if (counts[static_cast<size_t>(e)] > 0) {
            run.epoch_mean_total[static_cast<size_t>(e)] /= counts[static_cast<size_t>(e)];
            run.epoch_mean_lf[static_cast<size_t>(e)] /= counts[static_cast<size_t>(e)];
            run.epoch_mean_objective[static_cast<size_t>(e)] /= counts[static_cast<size_t>(e)];
        }
    }

    run.selected_epoch = select_checkpoint(run);

    const auto t_end = std::chrono::steady_clock::now();
    run.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();

    {
        json j = cfg;
        std::ofstream out(run_dir / "config.json");
        out << j.dump(2) << '\n';
    }
    save_loss_log(run.loss_log, run_dir / "losses.jsonl");
    {
        json j;
        j["selected_epoch"] = run.selected_epoch;
        j["epoch_mean_total"] = run.epoch_mean_total;
        j["epoch_mean_lf"] = run.epoch_mean_lf;
        std::ofstream out(run_dir / "selection.json");
        out << j.dump(2) << '\n';
    }

    return run;
}

int select_checkpoint(const RunArtifact& run) {
    if (run.checkpoint_epochs.empty()) throw ConfigError("select_checkpoint: no checkpoints");
    int best = run.checkpoint_epochs.front();
    double best_mean = run.epoch_mean_total[static_cast<size_t>(best)];
    for (int e : run.checkpoint_epochs) {
        const double mean = run.epoch_mean_total[static_cast<size_t>(e)];
        if (mean < best_mean) {
            best = e;
            best_mean = mean;
        }
    }
    return best;
}

AdapterSet load_checkpoint(const ToyModel& base, const TrainConfig& cfg,
                           const std::filesystem::path& run_dir, int epoch) {
    (void)cfg;
    return AdapterSet::load(base.cfg, checkpoint_dir(run_dir, epoch) / "adapters.bin");
}

std::vector<RunArtifact> run_variant_suite(const TrainConfig& base_cfg,
                                           const std::vector<Variant>& variants,
                                           const TriCorpora& corpora, const ToyModel& base,
                                           const CharTokenizer& tok,
                                           const std::filesystem::path& root_dir) {
    std::vector<RunArtifact> runs;
    runs.reserve(variants.size());
    for (Variant v : variants) {
        TrainConfig cfg = base_cfg;
        cfg.variant = v;
        runs.push_back(train(cfg, corpora, base, tok, root_dir / variant_name(v)));
    }
    return runs;
}

SweepArtifact gamma_sweep(const TrainConfig& base_cfg, const std::vector<double>& gammas,
                          const TriCorpora& corpora, const ToyModel& base,
                          const CharTokenizer& tok, const std::filesystem::path& root_dir) {
    if (gammas.size() < 2) throw ConfigError("gamma_sweep: need at least two gamma values");
    SweepArtifact sweep;
    for (double g : gammas) {
        TrainConfig cfg = base_cfg;
        cfg.gamma = g;
        std::string tag = "gamma-" + std::to_string(g);
        tag.erase(tag.find_last_not_of('0') + 1);
        if (!tag.empty() && tag.back() == '.') tag.pop_back();
        sweep.runs.push_back(train(cfg, corpora, base, tok, root_dir / tag));
    }
    for (const auto& run : sweep.runs) {
        SweepRow row;
        row.gamma = run.config.gamma;
        row.final_lf = run.epoch_mean_lf.back();
        row.final_total = run.epoch_mean_total.back();
        row.selected_epoch = run.selected_epoch;
        row.run_dir = run.run_dir.string();
        sweep.summary.push_back(std::move(row));
    }
    std::sort(sweep.summary.begin(), sweep.summary.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.gamma < b.gamma; });
    return sweep;
}

}  // namespace eraser
