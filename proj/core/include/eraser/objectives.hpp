#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "eraser/model.hpp"
#include "eraser/tape.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

// A tokenised prompt/response pair, the unit all losses operate on.
struct TokenPair {
    TokenSeq prompt;  // conditioning tokens, includes the separator
    TokenSeq target;  // response tokens, typically ending in eos
};

// Per-token conditional log-probabilities of a target given a prompt.
struct ScoredSequence {
    TokenSeq prompt_tokens;
    TokenSeq target_tokens;
    std::vector<double> per_token_logprob;  // nats, each <= 0

    double mean_log_prob() const;
};

// One evaluation of the combined objective.
// hinge = max(0, gamma + l_f); total = w_f*hinge + w_h*l_h + w_r*l_r.
struct LossBreakdown {
    double l_f = 0.0;  // mean target log-prob on the forget batch, <= 0
    double l_h = 0.0;  // helpful-retention KL, >= 0
    double l_r = 0.0;  // refusal-retention KL, >= 0
    double gamma = 0.0;
    double hinge = 0.0;
    double total = 0.0;
    std::array<double, 3> weights{1.0, 1.0, 1.0};

    bool consistent() const;
};

// Maps x to the (possibly disguised) prompt for a batch index. The epoch is
// bound by the caller; see augmentation.hpp.
using AugmentFn = std::function<TokenSeq(const TokenSeq& x, int sample_index)>;

AugmentFn identity_augmenter();

// Text -> token bridging. Prompts end in the separator token; targets end in
// eos, so losses always have at least one conditioning position.
TokenSeq encode_prompt(const CharTokenizer& tok, const std::string& text);
TokenPair encode_qa(const CharTokenizer& tok, const std::string& prompt,
                    const std::string& response);

// Fits prompt+target into max_total tokens: the prompt is trimmed from the
// left first (disguise prefixes go before the core query), then the target
// from the right.
void truncate_pair(TokenPair& pair, int max_total);

// ---- graph builders (shared by the pure API and the trainer) -------------

// Per-target-position log p(y_i | prompt, y_<i), shape (|target| x 1).
nn::Tape::Ref sequence_log_prob_graph(nn::Tape& tape, const ModelHandle& handle,
                                      const TokenSeq& prompt, const TokenSeq& target);

// Teacher next-token log distributions at every target position, (|target| x V).
nn::Mat teacher_response_log_probs(const ModelHandle& teacher, const TokenSeq& prompt,
                                   const TokenSeq& target);

// Per-position KL(student || teacher) given precomputed teacher rows, (|target| x 1).
nn::Tape::Ref retention_kl_graph(nn::Tape& tape, const ModelHandle& student,
                                 const TokenSeq& prompt, const TokenSeq& target,
                                 nn::Mat teacher_log_probs);

// Batch-mean scalars. Reduction: per-token mean within a sample, then mean
// over the batch.
nn::Tape::Ref unlearn_loss_graph(nn::Tape& tape, const ModelHandle& handle,
                                 const std::vector<TokenPair>& augmented_batch);
nn::Tape::Ref retention_loss_graph(nn::Tape& tape, const ModelHandle& student,
                                   const std::vector<TokenPair>& batch,
                                   const std::vector<nn::Mat>& teacher_rows);

// ---- pure evaluation API ---------------------------------------------------

ScoredSequence sequence_log_prob(const ModelHandle& handle, const TokenSeq& prompt,
                                 const TokenSeq& target);

double unlearn_loss(const ModelHandle& handle, const std::vector<TokenPair>& batch,
                    const AugmentFn& augmenter);

// KL(p || q) in nats over two probability vectors; 0 ln 0 := 0.
double token_kl(const std::vector<double>& student_dist, const std::vector<double>& teacher_dist);

double retention_loss(const ModelHandle& student, const ModelHandle& teacher,
                      const std::vector<TokenPair>& batch);

LossBreakdown combined_loss(double l_f, double l_h, double l_r, double gamma);
LossBreakdown combined_loss(double l_f, double l_h, double l_r, double gamma,
                            const std::array<double, 3>& weights);

}  // namespace eraser
