#include "eraser/augmentation.hpp"

#include <stdexcept>

#include "eraser/errors.hpp"
#include "eraser/rng.hpp"

namespace eraser {

void AugmentationSpec::validate() const {
    if (prefix_min < 0 || suffix_min < 0 || prefix_max < prefix_min || suffix_max < suffix_min) {
        throw ConfigError("AugmentationSpec: invalid length ranges");
    }
    const bool needs_tokens = prefix_max > 0 || suffix_max > 0;
    if (needs_tokens && allowed_tokens.empty()) {
        throw ConfigError("AugmentationSpec: empty sampling vocabulary");
    }
}

AugmentationSpec AugmentationSpec::identity(uint64_t seed_base) {
    AugmentationSpec s;
    s.prefix_min = s.prefix_max = s.suffix_min = s.suffix_max = 0;
    s.epoch_seed_base = seed_base;
    return s;
}

AugmentationSpec AugmentationSpec::for_tokenizer(const CharTokenizer& tok, int prefix_min,
                                                 int prefix_max, int suffix_min, int suffix_max,
                                                 uint64_t seed_base) {
    AugmentationSpec s;
    s.prefix_min = prefix_min;
    s.prefix_max = prefix_max;
    s.suffix_min = suffix_min;
    s.suffix_max = suffix_max;
    s.epoch_seed_base = seed_base;
    for (int id = CharTokenizer::kNumSpecial; id < tok.vocab_size(); ++id) {
        s.allowed_tokens.push_back(id);
    }
    s.validate();
    return s;
}

AugmentedPrompt augment(const TokenSeq& x, const AugmentationSpec& spec, int epoch,
                        int sample_index) {
    if (x.empty()) throw std::invalid_argument("augment: empty input sequence");
    spec.validate();

    Rng rng(mix_seed(spec.epoch_seed_base, static_cast<uint64_t>(epoch),
                     static_cast<uint64_t>(sample_index)));
    const int np = rng.range_inclusive(spec.prefix_min, spec.prefix_max);
    const int ns = rng.range_inclusive(spec.suffix_min, spec.suffix_max);

    AugmentedPrompt out;
    out.epoch = epoch;
    out.tokens.reserve(x.size() + static_cast<size_t>(np) + static_cast<size_t>(ns));
    for (int i = 0; i < np; ++i) {
        out.tokens.push_back(spec.allowed_tokens[rng.below(spec.allowed_tokens.size())]);
    }
    out.core_start = np;
    out.tokens.insert(out.tokens.end(), x.begin(), x.end());
    out.core_end = static_cast<int>(out.tokens.size());
    for (int i = 0; i < ns; ++i) {
        out.tokens.push_back(spec.allowed_tokens[rng.below(spec.allowed_tokens.size())]);
    }
    return out;
}

TokenSeq make_random_target(int len_min, int len_max, const AugmentationSpec& spec, uint64_t seed) {
    if (len_min < 1 || len_max < len_min) {
        throw std::invalid_argument("make_random_target: length range lower bound must be >= 1");
    }
    if (spec.allowed_tokens.empty()) {
        throw ConfigError("make_random_target: empty sampling vocabulary");
    }
    Rng rng(mix_seed(spec.epoch_seed_base, seed));
    const int len = rng.range_inclusive(len_min, len_max);
    TokenSeq out;
    out.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        out.push_back(spec.allowed_tokens[rng.below(spec.allowed_tokens.size())]);
    }
    return out;
}

AugmentFn epoch_augmenter(const AugmentationSpec& spec, int epoch) {
    return [spec, epoch](const TokenSeq& x, int sample_index) {
        return augment(x, spec, epoch, sample_index).tokens;
    };
}

}  // namespace eraser
