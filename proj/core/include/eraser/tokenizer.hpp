#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eraser {

// Character-level tokenizer. Ids 0 and 1 are control tokens (prompt/response
// separator and end-of-sequence); text characters start at id 2. Input is
// case-folded so the alphabet stays small.
class CharTokenizer {
public:
    static constexpr int kSep = 0;
    static constexpr int kEos = 1;
    static constexpr int kNumSpecial = 2;

    explicit CharTokenizer(std::string alphabet);

    // Alphabet = sorted unique case-folded characters of the given text.
    static CharTokenizer from_text(std::string_view text);

    int vocab_size() const { return kNumSpecial + static_cast<int>(alphabet_.size()); }
    const std::string& alphabet() const { return alphabet_; }

    bool is_special(int id) const { return id < kNumSpecial; }

    // Case-folds; characters outside the alphabet map to the fallback (space
    // when available, otherwise the first alphabet character).
    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

private:
    std::string alphabet_;
    int fallback_id_;
    std::vector<int> char_to_id_;  // indexed by unsigned char
};

}  // namespace eraser
