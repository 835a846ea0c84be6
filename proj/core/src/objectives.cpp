#include "eraser/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "eraser/errors.hpp"

namespace eraser {

using nn::Mat;
using nn::Tape;

double ScoredSequence::mean_log_prob() const {
    double s = 0.0;
    for (double x : per_token_logprob) s += x;
    return s / static_cast<double>(per_token_logprob.size());
}

bool LossBreakdown::consistent() const {
    if (gamma <= 0.0) return false;
    const double expect_hinge = std::max(0.0, gamma + l_f);
    const double expect_total = weights[0] * hinge + weights[1] * l_h + weights[2] * l_r;
    return hinge == expect_hinge && total == expect_total;
}

AugmentFn identity_augmenter() {
    return [](const TokenSeq& x, int) { return x; };
}

TokenSeq encode_prompt(const CharTokenizer& tok, const std::string& text) {
    TokenSeq ids = tok.encode(text);
    ids.push_back(CharTokenizer::kSep);
    return ids;
}

TokenPair encode_qa(const CharTokenizer& tok, const std::string& prompt,
                    const std::string& response) {
    TokenPair p;
    p.prompt = encode_prompt(tok, prompt);
    p.target = tok.encode(response);
    p.target.push_back(CharTokenizer::kEos);
    return p;
}

void truncate_pair(TokenPair& pair, int max_total) {
    if (max_total < 2) throw std::invalid_argument("truncate_pair: max_total must be >= 2");
    if (static_cast<int>(pair.target.size()) > max_total - 1) {
        pair.target.resize(static_cast<size_t>(max_total - 1));
    }
    const int budget = max_total - static_cast<int>(pair.target.size());
    if (static_cast<int>(pair.prompt.size()) > budget) {
        pair.prompt.erase(pair.prompt.begin(),
                          pair.prompt.end() - static_cast<std::ptrdiff_t>(budget));
    }
}

namespace {

void check_pair(const TokenSeq& prompt, const TokenSeq& target, const ModelHandle& h) {
    if (target.empty()) throw std::invalid_argument("sequence scoring: empty target");
    if (prompt.empty()) throw std::invalid_argument("sequence scoring: empty prompt");
    const size_t n = prompt.size() + target.size();
    if (static_cast<int>(n) > h.max_seq_len()) {
        throw TruncationError("sequence scoring: prompt+target exceeds max sequence length; "
                              "callers must pre-truncate");
    }
}

TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
    TokenSeq out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

// Mean of a batch of scalar nodes: sequential sum, then multiply by 1/B.
Tape::Ref batch_mean(Tape& t, const std::vector<Tape::Ref>& scalars) {
    Tape::Ref acc = scalars[0];
    for (size_t i = 1; i < scalars.size(); ++i) acc = t.add(acc, scalars[i]);
    return t.scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

}  // namespace

Tape::Ref sequence_log_prob_graph(Tape& t, const ModelHandle& h, const TokenSeq& prompt,
                                  const TokenSeq& target) {
    check_pair(prompt, target, h);
    const int np = static_cast<int>(prompt.size());
    const int nt = static_cast<int>(target.size());
    Tape::Ref logits = model_forward(t, h, concat(prompt, target));
    // Row np-1+i predicts target[i].
    Tape::Ref resp = t.rows(logits, np - 1, nt);
    return t.token_log_probs(resp, target);
}

Mat teacher_response_log_probs(const ModelHandle& teacher, const TokenSeq& prompt,
                               const TokenSeq& target) {
    check_pair(prompt, target, teacher);
    const int np = static_cast<int>(prompt.size());
    const int nt = static_cast<int>(target.size());
    const Mat logits = forward_logits(teacher, concat(prompt, target));
    Mat rows(nt, logits.cols);
    for (int i = 0; i < nt; ++i) {
        const double* src = logits.row(np - 1 + i);
        double* dst = rows.row(i);
        for (int j = 0; j < logits.cols; ++j) dst[j] = src[j];
    }
    Mat out(nt, logits.cols);
    nn::log_softmax_rows(rows, out);
    return out;
}

Tape::Ref retention_kl_graph(Tape& t, const ModelHandle& student, const TokenSeq& prompt,
                             const TokenSeq& target, Mat teacher_log_probs) {
    check_pair(prompt, target, student);
    const int np = static_cast<int>(prompt.size());
    const int nt = static_cast<int>(target.size());
    if (teacher_log_probs.rows != nt || teacher_log_probs.cols != student.vocab_size()) {
        throw ConfigError("retention: teacher distribution shape does not match student vocabulary");
    }
    Tape::Ref logits = model_forward(t, student, concat(prompt, target));
    Tape::Ref resp = t.rows(logits, np - 1, nt);
    return t.kl_rows_vs_const(resp, std::move(teacher_log_probs));
}

Tape::Ref unlearn_loss_graph(Tape& t, const ModelHandle& h, const std::vector<TokenPair>& batch) {
    if (batch.empty()) throw std::invalid_argument("unlearn_loss: empty batch");
    std::vector<Tape::Ref> means;
    means.reserve(batch.size());
    for (const auto& pair : batch) {
        means.push_back(t.mean_all(sequence_log_prob_graph(t, h, pair.prompt, pair.target)));
    }
    return batch_mean(t, means);
}

Tape::Ref retention_loss_graph(Tape& t, const ModelHandle& student,
                               const std::vector<TokenPair>& batch,
                               const std::vector<Mat>& teacher_rows) {
    if (batch.empty()) throw std::invalid_argument("retention_loss: empty batch");
    if (teacher_rows.size() != batch.size()) {
        throw std::invalid_argument("retention_loss: teacher rows do not match batch");
    }
    std::vector<Tape::Ref> means;
    means.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        means.push_back(t.mean_all(
            retention_kl_graph(t, student, batch[i].prompt, batch[i].target, teacher_rows[i])));
    }
    return batch_mean(t, means);
}

ScoredSequence sequence_log_prob(const ModelHandle& handle, const TokenSeq& prompt,
                                 const TokenSeq& target) {
    Tape t(/*grad_enabled=*/false);
    Tape::Ref per_token = sequence_log_prob_graph(t, handle, prompt, target);
    ScoredSequence out;
    out.prompt_tokens = prompt;
    out.target_tokens = target;
    out.per_token_logprob = t.value(per_token).v;
    return out;
}

double unlearn_loss(const ModelHandle& handle, const std::vector<TokenPair>& batch,
                    const AugmentFn& augmenter) {
    if (batch.empty()) throw std::invalid_argument("unlearn_loss: empty batch");
    std::vector<TokenPair> augmented;
    augmented.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].prompt.empty() || batch[i].target.empty()) {
            throw std::invalid_argument("unlearn_loss: pair with empty prompt or target");
        }
        augmented.push_back({augmenter(batch[i].prompt, static_cast<int>(i)), batch[i].target});
    }
    Tape t(/*grad_enabled=*/false);
    return t.value(unlearn_loss_graph(t, handle, augmented)).v[0];
}

double token_kl(const std::vector<double>& student_dist, const std::vector<double>& teacher_dist) {
    if (student_dist.size() != teacher_dist.size()) {
        throw std::invalid_argument("token_kl: distribution lengths differ");
    }
    if (student_dist.empty()) throw std::invalid_argument("token_kl: empty distributions");
    double sp = 0.0, sq = 0.0;
    for (size_t i = 0; i < student_dist.size(); ++i) {
        if (student_dist[i] < 0.0 || teacher_dist[i] < 0.0) {
            throw std::invalid_argument("token_kl: negative probability");
        }
        sp += student_dist[i];
        sq += teacher_dist[i];
    }
    if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6) {
        throw std::invalid_argument("token_kl: distributions must sum to 1");
    }
    double kl = 0.0;
    for (size_t i = 0; i < student_dist.size(); ++i) {
        const double p = student_dist[i];
        if (p > 0.0) kl += p * std::log(p / teacher_dist[i]);
    }
    return kl;
}

double retention_loss(const ModelHandle& student, const ModelHandle& teacher,
                      const std::vector<TokenPair>& batch) {
    if (batch.empty()) throw std::invalid_argument("retention_loss: empty batch");
    if (student.vocab_size() != teacher.vocab_size()) {
        throw ConfigError("retention_loss: student and teacher vocabularies differ");
    }
    std::vector<Mat> rows;
    rows.reserve(batch.size());
    for (const auto& pair : batch) {
        rows.push_back(teacher_response_log_probs(teacher, pair.prompt, pair.target));
    }
    Tape t(/*grad_enabled=*/false);
    return t.value(retention_loss_graph(t, student, batch, rows)).v[0];
}

LossBreakdown combined_loss(double l_f, double l_h, double l_r, double gamma) {
    return combined_loss(l_f, l_h, l_r, gamma, {1.0, 1.0, 1.0});
}

LossBreakdown combined_loss(double l_f, double l_h, double l_r, double gamma,
                            const std::array<double, 3>& weights) {
    if (gamma <= 0.0) throw ConfigError("combined_loss: gamma must be positive");
    LossBreakdown b;
    b.l_f = l_f;
    b.l_h = l_h;
    b.l_r = l_r;
    b.gamma = gamma;
    b.weights = weights;
    b.hinge = std::max(0.0, gamma + l_f);
    b.total = weights[0] * b.hinge + weights[1] * l_h + weights[2] * l_r;
    return b;
}

}  // namespace eraser
