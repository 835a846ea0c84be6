#pragma once

#include <cstdint>
#include <vector>

#include "eraser/objectives.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

// Parameters of the random prefix/suffix wrapper that disguises prompts
// during unlearning. Lengths are sampled per (epoch, sample); tokens are
// drawn uniformly from the allowed (non-control) vocabulary.
struct AugmentationSpec {
    int prefix_min = 5;
    int prefix_max = 20;
    int suffix_min = 5;
    int suffix_max = 20;
    std::vector<int> allowed_tokens;
    uint64_t epoch_seed_base = 0;

    void validate() const;

    static AugmentationSpec identity(uint64_t seed_base = 0);
    static AugmentationSpec for_tokenizer(const CharTokenizer& tok, int prefix_min, int prefix_max,
                                          int suffix_min, int suffix_max, uint64_t seed_base);
};

struct AugmentedPrompt {
    TokenSeq tokens;
    int core_start = 0;  // x occupies [core_start, core_end)
    int core_end = 0;
    int epoch = 0;
};

// prefix | x | suffix, fully determined by (spec, epoch, sample_index).
AugmentedPrompt augment(const TokenSeq& x, const AugmentationSpec& spec, int epoch,
                        int sample_index);

// Uniform random token sequence over the allowed vocabulary, length uniform
// in [len_min, len_max], deterministic given seed.
TokenSeq make_random_target(int len_min, int len_max, const AugmentationSpec& spec, uint64_t seed);

// Binds an epoch, producing the prompt-mapping function losses consume.
AugmentFn epoch_augmenter(const AugmentationSpec& spec, int epoch);

}  // namespace eraser
