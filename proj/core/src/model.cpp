#include "eraser/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "eraser/errors.hpp"
#include "eraser/rng.hpp"
#include "binio.hpp"

namespace eraser {

using nn::Mat;
using nn::Tape;

void ModelConfig::validate() const {
    if (vocab_size < 3) throw ConfigError("ModelConfig: vocab_size must cover specials + text");
    if (vocab_size > 512) throw ConfigError("ModelConfig: vocab_size exceeds 512");
    if (dim <= 0 || n_layers <= 0 || n_heads <= 0 || max_seq_len <= 0) {
        throw ConfigError("ModelConfig: dimensions must be positive");
    }
    if (n_layers > 4) throw ConfigError("ModelConfig: at most 4 layers");
    if (dim > 128) throw ConfigError("ModelConfig: width capped at 128");
    if (dim % n_heads != 0) throw ConfigError("ModelConfig: dim must divide by n_heads");
}

namespace {

Mat gaussian_mat(int r, int c, Rng& rng, double std) {
    Mat m(r, c);
    for (double& x : m.v) x = rng.gaussian() * std;
    return m;
}

Mat const_row(int c, double value) {
    Mat m(1, c);
    for (double& x : m.v) x = value;
    return m;
}

}  // namespace

ToyModel::ToyModel(ModelConfig config) : cfg(config) {
    cfg.validate();
    register_params(true);
}

void ToyModel::register_params(bool init) {
    Rng rng(cfg.init_seed);
    const int d = cfg.dim;
    const int hidden = 4 * d;
    auto weight = [&](const std::string& name, int r, int c) {
        return params.add(name, init ? gaussian_mat(r, c, rng, cfg.init_std) : Mat(r, c));
    };
    auto zeros = [&](const std::string& name, int r, int c) { return params.add(name, Mat(r, c)); };
    auto ones_row = [&](const std::string& name, int c) {
        return params.add(name, init ? const_row(c, 1.0) : Mat(1, c));
    };

    tok_emb = weight("tok_emb", cfg.vocab_size, d);
    pos_emb = weight("pos_emb", cfg.max_seq_len, d);
    layers.resize(static_cast<size_t>(cfg.n_layers));
    for (int li = 0; li < cfg.n_layers; ++li) {
        auto& L = layers[static_cast<size_t>(li)];
        const std::string p = "layer" + std::to_string(li) + ".";
        L.ln1_g = ones_row(p + "ln1_g", d);
        L.ln1_b = zeros(p + "ln1_b", 1, d);
        L.wq = weight(p + "wq", d, d);
        L.bq = zeros(p + "bq", 1, d);
        L.wk = weight(p + "wk", d, d);
        L.bk = zeros(p + "bk", 1, d);
        L.wv = weight(p + "wv", d, d);
        L.bv = zeros(p + "bv", 1, d);
        L.wo = weight(p + "wo", d, d);
        L.bo = zeros(p + "bo", 1, d);
        L.ln2_g = ones_row(p + "ln2_g", d);
        L.ln2_b = zeros(p + "ln2_b", 1, d);
        L.w_up = weight(p + "w_up", d, hidden);
        L.b_up = zeros(p + "b_up", 1, hidden);
        L.w_down = weight(p + "w_down", hidden, d);
        L.b_down = zeros(p + "b_down", 1, d);
    }
    lnf_g = ones_row("lnf_g", d);
    lnf_b = zeros("lnf_b", 1, d);
    w_head = weight("w_head", d, cfg.vocab_size);
}

namespace {
constexpr char kModelMagic[9] = "ERSRMDL1";
constexpr char kAdapterMagic[9] = "ERSRADP1";
}  // namespace

void ToyModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    detail::write_magic(out, kModelMagic);
    detail::write_u32(out, static_cast<uint32_t>(cfg.vocab_size));
    detail::write_u32(out, static_cast<uint32_t>(cfg.max_seq_len));
    detail::write_u32(out, static_cast<uint32_t>(cfg.dim));
    detail::write_u32(out, static_cast<uint32_t>(cfg.n_layers));
    detail::write_u32(out, static_cast<uint32_t>(cfg.n_heads));
    detail::write_u64(out, cfg.init_seed);
    detail::write_f64(out, cfg.init_std);
    detail::write_f64(out, cfg.ln_eps);
    detail::write_u32(out, static_cast<uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const Mat& w = params.weights(i);
        detail::write_u32(out, static_cast<uint32_t>(w.rows));
        detail::write_u32(out, static_cast<uint32_t>(w.cols));
        detail::write_f64s(out, w.v);
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

ToyModel ToyModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    detail::expect_magic(in, kModelMagic, path.string());
    ToyModel m;
    m.cfg.vocab_size = static_cast<int>(detail::read_u32(in));
    m.cfg.max_seq_len = static_cast<int>(detail::read_u32(in));
    m.cfg.dim = static_cast<int>(detail::read_u32(in));
    m.cfg.n_layers = static_cast<int>(detail::read_u32(in));
    m.cfg.n_heads = static_cast<int>(detail::read_u32(in));
    m.cfg.init_seed = detail::read_u64(in);
    m.cfg.init_std = detail::read_f64(in);
    m.cfg.ln_eps = detail::read_f64(in);
    m.cfg.validate();
    m.register_params(false);
    const auto n = detail::read_u32(in);
    if (static_cast<int>(n) != m.params.count()) throw FormatError("model file: parameter count mismatch");
    for (int i = 0; i < m.params.count(); ++i) {
        Mat& w = m.params.weights(i);
        const auto r = detail::read_u32(in);
        const auto c = detail::read_u32(in);
        if (static_cast<int>(r) != w.rows || static_cast<int>(c) != w.cols) {
            throw FormatError("model file: shape mismatch for " + m.params.name(i));
        }
        detail::read_f64s(in, w.v);
    }
    return m;
}

AdapterSet::AdapterSet(const ModelConfig& model_cfg, AdapterConfig config) : cfg(config) {
    if (cfg.rank <= 0) throw ConfigError("AdapterConfig: rank must be positive");
    Rng rng(cfg.init_seed);
    const int d = model_cfg.dim;
    static constexpr const char* kProj[4] = {"q", "k", "v", "o"};
    layers.resize(static_cast<size_t>(model_cfg.n_layers));
    for (int li = 0; li < model_cfg.n_layers; ++li) {
        for (int p = 0; p < 4; ++p) {
            const std::string base =
                "layer" + std::to_string(li) + ".adapter_" + kProj[p];
            // A is random, B starts at zero: delta W = 0 at initialisation.
            PairIds ids;
            ids.a = params.add(base + ".a", gaussian_mat(cfg.rank, d, rng, cfg.init_std));
            ids.b = params.add(base + ".b", Mat(d, cfg.rank));
            layers[static_cast<size_t>(li)][static_cast<size_t>(p)] = ids;
        }
    }
}

void AdapterSet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    detail::write_magic(out, kAdapterMagic);
    detail::write_u32(out, static_cast<uint32_t>(cfg.rank));
    detail::write_f64(out, cfg.alpha);
    detail::write_u64(out, cfg.init_seed);
    detail::write_f64(out, cfg.init_std);
    detail::write_u32(out, static_cast<uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const Mat& w = params.weights(i);
        detail::write_u32(out, static_cast<uint32_t>(w.rows));
        detail::write_u32(out, static_cast<uint32_t>(w.cols));
        detail::write_f64s(out, w.v);
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

AdapterSet AdapterSet::load(const ModelConfig& model_cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    detail::expect_magic(in, kAdapterMagic, path.string());
    AdapterConfig cfg;
    cfg.rank = static_cast<int>(detail::read_u32(in));
    cfg.alpha = detail::read_f64(in);
    cfg.init_seed = detail::read_u64(in);
    cfg.init_std = detail::read_f64(in);
    AdapterSet a(model_cfg, cfg);
    const auto n = detail::read_u32(in);
    if (static_cast<int>(n) != a.params.count()) throw FormatError("adapter file: parameter count mismatch");
    for (int i = 0; i < a.params.count(); ++i) {
        Mat& w = a.params.weights(i);
        const auto r = detail::read_u32(in);
        const auto c = detail::read_u32(in);
        if (static_cast<int>(r) != w.rows || static_cast<int>(c) != w.cols) {
            throw FormatError("adapter file: shape mismatch for " + a.params.name(i));
        }
        detail::read_f64s(in, w.v);
    }
    return a;
}

int ModelHandle::vocab_size() const { return model->cfg.vocab_size; }
int ModelHandle::max_seq_len() const { return model->cfg.max_seq_len; }

namespace {

// Effective projection weight node: base W, or W + scaling * (B A) when the
// handle has adapters enabled.
Tape::Ref effective_weight(Tape& t, const ModelHandle& h, int layer, int proj, int base_id) {
    Tape::Ref w = t.param(h.model->params, base_id);
    if (h.uses_adapters()) {
        const auto& ids = h.adapters->layers[static_cast<size_t>(layer)][static_cast<size_t>(proj)];
        Tape::Ref delta = t.matmul(t.param(h.adapters->params, ids.b), t.param(h.adapters->params, ids.a));
        w = t.add(w, t.scale(delta, h.adapters->scaling()));
    }
    return w;
}

}  // namespace

Tape::Ref model_forward(Tape& t, const ModelHandle& h, const TokenSeq& tokens) {
    if (h.model == nullptr) throw ConfigError("model_forward: null model");
    const ToyModel& m = *h.model;
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw std::invalid_argument("model_forward: empty token sequence");
    if (n > m.cfg.max_seq_len) {
        throw TruncationError("model_forward: sequence length " + std::to_string(n) +
                              " exceeds max_seq_len " + std::to_string(m.cfg.max_seq_len));
    }
    for (int id : tokens) {
        if (id < 0 || id >= m.cfg.vocab_size) throw std::invalid_argument("model_forward: token id out of range");
    }

    const auto& P = m.params;
    const int dh = m.cfg.head_dim();
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tape::Ref x = t.add(t.gather_rows(t.param(P, m.tok_emb), tokens), t.rows(t.param(P, m.pos_emb), 0, n));

    for (int li = 0; li < m.cfg.n_layers; ++li) {
        const auto& L = m.layers[static_cast<size_t>(li)];
        Tape::Ref h1 = t.layer_norm(x, t.param(P, L.ln1_g), t.param(P, L.ln1_b), m.cfg.ln_eps);
        Tape::Ref q = t.add_row_broadcast(t.matmul(h1, effective_weight(t, h, li, 0, L.wq)), t.param(P, L.bq));
        Tape::Ref k = t.add_row_broadcast(t.matmul(h1, effective_weight(t, h, li, 1, L.wk)), t.param(P, L.bk));
        Tape::Ref v = t.add_row_broadcast(t.matmul(h1, effective_weight(t, h, li, 2, L.wv)), t.param(P, L.bv));
        Tape::Ref wo_eff = effective_weight(t, h, li, 3, L.wo);

        Tape::Ref attn{};
        for (int hd = 0; hd < m.cfg.n_heads; ++hd) {
            Tape::Ref qh = t.cols(q, hd * dh, dh);
            Tape::Ref kh = t.cols(k, hd * dh, dh);
            Tape::Ref vh = t.cols(v, hd * dh, dh);
            Tape::Ref scores = t.scale(t.matmul_nt(qh, kh), att_scale);
            Tape::Ref probs = t.causal_softmax(scores);
            Tape::Ref oh = t.matmul(probs, vh);
            Tape::Ref contrib = t.matmul(oh, t.rows(wo_eff, hd * dh, dh));
            attn = hd == 0 ? contrib : t.add(attn, contrib);
        }
        x = t.add(x, t.add_row_broadcast(attn, t.param(P, L.bo)));

        Tape::Ref h2 = t.layer_norm(x, t.param(P, L.ln2_g), t.param(P, L.ln2_b), m.cfg.ln_eps);
        Tape::Ref up = t.gelu(t.add_row_broadcast(t.matmul(h2, t.param(P, L.w_up)), t.param(P, L.b_up)));
        Tape::Ref down = t.add_row_broadcast(t.matmul(up, t.param(P, L.w_down)), t.param(P, L.b_down));
        x = t.add(x, down);
    }

    Tape::Ref xf = t.layer_norm(x, t.param(P, m.lnf_g), t.param(P, m.lnf_b), m.cfg.ln_eps);
    return t.matmul(xf, t.param(P, m.w_head));
}

Mat forward_logits(const ModelHandle& handle, const TokenSeq& tokens) {
    Tape t(/*grad_enabled=*/false);
    Tape::Ref logits = model_forward(t, handle, tokens);
    return t.value(logits);
}

DecodeSession::DecodeSession(const ModelHandle& handle) : handle_(handle) {
    const ToyModel& m = *handle_.model;
    eff_.resize(static_cast<size_t>(m.cfg.n_layers));
    for (int li = 0; li < m.cfg.n_layers; ++li) {
        const auto& L = m.layers[static_cast<size_t>(li)];
        const int base_ids[4] = {L.wq, L.wk, L.wv, L.wo};
        Mat* dst[4] = {&eff_[li].wq, &eff_[li].wk, &eff_[li].wv, &eff_[li].wo};
        for (int p = 0; p < 4; ++p) {
            Mat w = m.params.weights(base_ids[p]);
            if (handle_.uses_adapters()) {
                const auto& ids = handle_.adapters->layers[static_cast<size_t>(li)][static_cast<size_t>(p)];
                Mat delta(w.rows, w.cols);
                nn::matmul_acc(handle_.adapters->params.weights(ids.b),
                               handle_.adapters->params.weights(ids.a), delta);
                const double s = handle_.adapters->scaling();
                for (size_t k = 0; k < w.size(); ++k) w.v[k] += delta.v[k] * s;
            }
            *dst[p] = std::move(w);
        }
    }
}

Mat DecodeSession::step(int token, int pos, std::vector<LayerState>& state) const {
    const ToyModel& m = *handle_.model;
    const auto& P = m.params;
    const int d = m.cfg.dim;
    const int dh = m.cfg.head_dim();
    const int hidden = 4 * d;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat x(1, d);
    {
        const double* te = P.weights(m.tok_emb).row(token);
        const double* pe = P.weights(m.pos_emb).row(pos);
        for (int j = 0; j < d; ++j) x.v[j] = te[j] + pe[j];
    }

    Mat h1(1, d), q(1, d), k(1, d), v(1, d);
    Mat attn(1, d), contrib(1, d), h2(1, d), up(1, hidden), down(1, d);

    for (int li = 0; li < m.cfg.n_layers; ++li) {
        const auto& L = m.layers[static_cast<size_t>(li)];
        LayerState& st = state[static_cast<size_t>(li)];
        nn::layernorm_row(x.v.data(), d, P.weights(L.ln1_g).v.data(), P.weights(L.ln1_b).v.data(),
                          m.cfg.ln_eps, h1.v.data(), nullptr, nullptr);
        q.zero();
        k.zero();
        v.zero();
        nn::matmul_acc(h1, eff_[li].wq, q);
        nn::matmul_acc(h1, eff_[li].wk, k);
        nn::matmul_acc(h1, eff_[li].wv, v);
        for (int j = 0; j < d; ++j) {
            q.v[j] += P.weights(L.bq).v[j];
            k.v[j] += P.weights(L.bk).v[j];
            v.v[j] += P.weights(L.bv).v[j];
        }
        // grow the cache
        for (int j = 0; j < d; ++j) {
            st.k.at(pos, j) = k.v[j];
            st.v.at(pos, j) = v.v[j];
        }

        attn.zero();
        std::vector<double> scores(static_cast<size_t>(pos) + 1);
        std::vector<double> probs(static_cast<size_t>(pos) + 1);
        std::vector<double> oh(static_cast<size_t>(dh));
        for (int hd = 0; hd < m.cfg.n_heads; ++hd) {
            const int off = hd * dh;
            for (int j = 0; j <= pos; ++j) {
                const double* kj = st.k.row(j) + off;
                double acc = 0.0;
                for (int p = 0; p < dh; ++p) acc += q.v[off + p] * kj[p];
                scores[static_cast<size_t>(j)] = acc * att_scale;
            }
            nn::softmax_row(scores.data(), probs.data(), pos + 1);
            std::fill(oh.begin(), oh.end(), 0.0);
            for (int j = 0; j <= pos; ++j) {
                const double pj = probs[static_cast<size_t>(j)];
                const double* vj = st.v.row(j) + off;
                for (int p = 0; p < dh; ++p) oh[static_cast<size_t>(p)] += pj * vj[p];
            }
            contrib.zero();
            for (int p = 0; p < dh; ++p) {
                const double ov = oh[static_cast<size_t>(p)];
                const double* wrow = eff_[li].wo.row(off + p);
                for (int j = 0; j < d; ++j) contrib.v[j] += ov * wrow[j];
            }
            for (int j = 0; j < d; ++j) attn.v[j] += contrib.v[j];
        }
        for (int j = 0; j < d; ++j) x.v[j] += attn.v[j] + P.weights(L.bo).v[j];

        nn::layernorm_row(x.v.data(), d, P.weights(L.ln2_g).v.data(), P.weights(L.ln2_b).v.data(),
                          m.cfg.ln_eps, h2.v.data(), nullptr, nullptr);
        up.zero();
        nn::matmul_acc(h2, P.weights(L.w_up), up);
        for (int j = 0; j < hidden; ++j) up.v[j] = nn::gelu_scalar(up.v[j] + P.weights(L.b_up).v[j]);
        down.zero();
        nn::matmul_acc(up, P.weights(L.w_down), down);
        for (int j = 0; j < d; ++j) x.v[j] += down.v[j] + P.weights(L.b_down).v[j];
    }

    Mat xf(1, d);
    nn::layernorm_row(x.v.data(), d, P.weights(m.lnf_g).v.data(), P.weights(m.lnf_b).v.data(),
                      m.cfg.ln_eps, xf.v.data(), nullptr, nullptr);
    Mat logits(1, m.cfg.vocab_size);
    nn::matmul_acc(xf, P.weights(m.w_head), logits);
    return logits;
}

TokenSeq DecodeSession::greedy(const TokenSeq& prompt, int max_new, int eos_id) {
    if (prompt.empty()) throw std::invalid_argument("DecodeSession::greedy: empty prompt");
    const ToyModel& m = *handle_.model;
    if (static_cast<int>(prompt.size()) >= m.cfg.max_seq_len) {
        throw TruncationError("DecodeSession::greedy: prompt fills the context window");
    }

    std::vector<LayerState> state(static_cast<size_t>(m.cfg.n_layers));
    for (auto& st : state) {
        st.k = Mat(m.cfg.max_seq_len, m.cfg.dim);
        st.v = Mat(m.cfg.max_seq_len, m.cfg.dim);
    }

    Mat logits;
    int pos = 0;
    for (int tok : prompt) {
        logits = step(tok, pos, state);
        ++pos;
    }

    TokenSeq out;
    for (int i = 0; i < max_new && pos < m.cfg.max_seq_len; ++i) {
        int best = 0;
        for (int j = 1; j < logits.cols; ++j) {
            if (logits.v[static_cast<size_t>(j)] > logits.v[static_cast<size_t>(best)]) best = j;
        }
        if (best == eos_id) break;
        out.push_back(best);
        logits = step(best, pos, state);
        ++pos;
    }
    return out;
}

}  // namespace eraser
