#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eraser/augmentation.hpp"
#include "eraser/corpus.hpp"
#include "eraser/model.hpp"
#include "eraser/objectives.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

enum class Variant {
    eraser,
    eraser_no_T,
    eraser_no_Lh,
    eraser_no_Lr,
    ga_only,
    ga_random,
    eraser_random,
    rsft,
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

bool variant_uses_augmentation(Variant v);
bool variant_uses_helpful(Variant v);
bool variant_uses_refusal(Variant v);
bool variant_uses_random_targets(Variant v);
bool variant_is_gradient_ascent_only(Variant v);

struct TrainConfig {
    double gamma = 2.0;
    int batch_size = 64;
    int max_seq_len = 2048;
    double learning_rate = 2e-5;
    int epochs = 5;
    int adapter_rank = 8;
    double adapter_alpha = 16.0;
    double weight_decay = 0.0;
    Variant variant = Variant::eraser;
    std::array<double, 3> term_weights{1.0, 1.0, 1.0};

    struct Seeds {
        uint64_t data = 1;
        uint64_t augment = 2;
        uint64_t init = 3;
    } seeds;

    int aug_prefix_min = 5;
    int aug_prefix_max = 20;
    int aug_suffix_min = 5;
    int aug_suffix_max = 20;

    // SFT baseline: unified refusal response used as the target for
    // disguised harmful prompts.
    std::string rsft_refusal_target = "I cannot help with that request.";

    void validate() const;
};

struct StepRecord {
    int step = 0;
    int epoch = 0;
    LossBreakdown loss;
    double objective = 0.0;  // the scalar actually minimised this step
};

struct RunArtifact {
    TrainConfig config;
    std::filesystem::path run_dir;
    std::vector<StepRecord> loss_log;
    std::vector<int> checkpoint_epochs;
    int selected_epoch = -1;
    double wall_seconds = 0.0;

    std::vector<double> epoch_mean_total;
    std::vector<double> epoch_mean_lf;
    std::vector<double> epoch_mean_objective;
};

struct TriCorpora {
    Corpus forget;   // role harmful
    Corpus helpful;  // role helpful
    Corpus refusal;  // role refusal
};

// Runs one training configuration over the corpora against a frozen base
// model, updating adapter weights only. Writes config.json, losses.jsonl,
// checkpoints/epoch-N/{adapters.bin,optimizer.bin} and selection.json under
// run_dir. With resume=true, continues from the last complete epoch found in
// run_dir and reproduces the remaining schedule exactly.
RunArtifact train(const TrainConfig& cfg, const TriCorpora& corpora, const ToyModel& base,
                  const CharTokenizer& tok, const std::filesystem::path& run_dir,
                  bool resume = false);

// Epoch with the lowest mean total training loss; ties resolve to the
// earliest epoch.
int select_checkpoint(const RunArtifact& run);

AdapterSet load_checkpoint(const ToyModel& base, const TrainConfig& cfg,
                           const std::filesystem::path& run_dir, int epoch);

// One run per variant under root_dir/<variant>, sharing every seed so result
// differences are attributable to the variant alone.
std::vector<RunArtifact> run_variant_suite(const TrainConfig& base_cfg,
                                           const std::vector<Variant>& variants,
                                           const TriCorpora& corpora, const ToyModel& base,
                                           const CharTokenizer& tok,
                                           const std::filesystem::path& root_dir);

struct SweepRow {
    double gamma = 0.0;
    double final_lf = 0.0;
    double final_total = 0.0;
    int selected_epoch = -1;
    std::string run_dir;
};

struct SweepArtifact {
    std::vector<RunArtifact> runs;
    std::vector<SweepRow> summary;  // sorted by gamma
};

SweepArtifact gamma_sweep(const TrainConfig& base_cfg, const std::vector<double>& gammas,
                          const TriCorpora& corpora, const ToyModel& base,
                          const CharTokenizer& tok, const std::filesystem::path& root_dir);

// losses.jsonl round-trip, used by reporting and by resume.
void save_loss_log(const std::vector<StepRecord>& log, const std::filesystem::path& path);
std::vector<StepRecord> load_loss_log(const std::filesystem::path& path);

}  // namespace eraser
