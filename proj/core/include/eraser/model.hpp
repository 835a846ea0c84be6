#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eraser/tape.hpp"
#include "eraser/tensor.hpp"

namespace eraser {

using TokenSeq = std::vector<int>;

struct ModelConfig {
    int vocab_size = 0;
    int max_seq_len = 160;
    int dim = 48;
    int n_layers = 2;
    int n_heads = 4;
    uint64_t init_seed = 0;
    double init_std = 0.05;
    double ln_eps = 1e-5;

    int head_dim() const { return dim / n_heads; }
    void validate() const;
};

// Decoder-only transformer over the character vocabulary. Double precision
// throughout; forward passes are deterministic functions of (weights, input).
class ToyModel {
public:
    explicit ToyModel(ModelConfig cfg);

    struct LayerIds {
        int ln1_g, ln1_b;
        int wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_g, ln2_b;
        int w_up, b_up, w_down, b_down;
    };

    ModelConfig cfg;
    nn::ParamStore params;
    int tok_emb, pos_emb;
    std::vector<LayerIds> layers;
    int lnf_g, lnf_b, w_head;

    size_t param_count() const { return params.scalar_count(); }

    void save(const std::filesystem::path& path) const;
    static ToyModel load(const std::filesystem::path& path);

private:
    ToyModel() = default;
    void register_params(bool init);
};

// Low-rank additive adapters on the four attention projections of every
// layer. delta(W) = scaling * B A with B zero-initialised, so a fresh adapter
// set leaves the base model's outputs bit-identical.
struct AdapterConfig {
    int rank = 8;
    double alpha = 16.0;
    uint64_t init_seed = 0;
    double init_std = 0.02;
};

class AdapterSet {
public:
    AdapterSet(const ModelConfig& model_cfg, AdapterConfig cfg);

    struct PairIds {
        int a;  // rank x dim
        int b;  // dim x rank
    };

    AdapterConfig cfg;
    nn::ParamStore params;
    std::vector<std::array<PairIds, 4>> layers;  // q, k, v, o

    double scaling() const { return cfg.alpha / static_cast<double>(cfg.rank); }
    size_t param_count() const { return params.scalar_count(); }

    void save(const std::filesystem::path& path) const;
    static AdapterSet load(const ModelConfig& model_cfg, const std::filesystem::path& path);

private:
    AdapterSet() = default;
};

// A view of a model in a role: the teacher is the frozen base, the student is
// the base plus enabled adapters. Disabling adapters reproduces the teacher.
struct ModelHandle {
    const ToyModel* model = nullptr;
    const AdapterSet* adapters = nullptr;
    bool adapters_enabled = false;

    static ModelHandle teacher(const ToyModel& m) { return {&m, nullptr, false}; }
    static ModelHandle student(const ToyModel& m, const AdapterSet& a) { return {&m, &a, true}; }

    bool uses_adapters() const { return adapters != nullptr && adapters_enabled; }
    int vocab_size() const;
    int max_seq_len() const;
};

// Builds the forward graph for a token sequence; returns the (n x vocab)
// logits node. Requires 1 <= n <= max_seq_len.
nn::Tape::Ref model_forward(nn::Tape& tape, const ModelHandle& handle, const TokenSeq& tokens);

// Forward-only logits via the same graph arithmetic.
nn::Mat forward_logits(const ModelHandle& handle, const TokenSeq& tokens);

// Greedy decoding with a per-layer KV cache. Produces the same tokens as
// repeated full forwards (the arithmetic per position is identical).
class DecodeSession {
public:
    explicit DecodeSession(const ModelHandle& handle);

    // Appends generated tokens until eos or max_new tokens; returns only the
    // newly generated ids (eos excluded).
    TokenSeq greedy(const TokenSeq& prompt, int max_new, int eos_id);

private:
    struct LayerState {
        nn::Mat k;  // pos x dim
        nn::Mat v;
    };

    const ModelHandle handle_;
    // Effective (adapter-merged) projection weights, materialised once.
    struct LayerWeights {
        nn::Mat wq, wk, wv, wo;
    };
    std::vector<LayerWeights> eff_;

    // Feeds one token at position pos; returns logits row.
    nn::Mat step(int token, int pos, std::vector<LayerState>& state) const;
};

}  // namespace eraser
