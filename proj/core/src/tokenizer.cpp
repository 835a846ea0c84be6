#include "eraser/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace eraser {

namespace {
char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
}  // namespace

CharTokenizer::CharTokenizer(std::string alphabet) : char_to_id_(256, -1) {
    std::string folded;
    folded.reserve(alphabet.size());
    for (char c : alphabet) folded.push_back(fold(c));
    std::sort(folded.begin(), folded.end());
    folded.erase(std::unique(folded.begin(), folded.end()), folded.end());
    if (folded.empty()) throw std::invalid_argument("CharTokenizer: empty alphabet");
    alphabet_ = std::move(folded);

    for (size_t i = 0; i < alphabet_.size(); ++i) {
        char_to_id_[static_cast<unsigned char>(alphabet_[i])] = kNumSpecial + static_cast<int>(i);
    }
    const auto space = alphabet_.find(' ');
    fallback_id_ = kNumSpecial + static_cast<int>(space == std::string::npos ? 0 : space);
}

CharTokenizer CharTokenizer::from_text(std::string_view text) {
    std::set<char> chars;
    for (char c : text) chars.insert(fold(c));
    return CharTokenizer(std::string(chars.begin(), chars.end()));
}

std::vector<int> CharTokenizer::encode(std::string_view text) const {
    std::vector<int> out;
    out.reserve(text.size());
    for (char c : text) {
        const int id = char_to_id_[static_cast<unsigned char>(fold(c))];
        out.push_back(id >= 0 ? id : fallback_id_);
    }
    return out;
}

std::string CharTokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (is_special(id)) continue;
        const int k = id - kNumSpecial;
        if (k < 0 || k >= static_cast<int>(alphabet_.size())) {
            throw std::invalid_argument("CharTokenizer::decode: id out of range");
        }
        out.push_back(alphabet_[static_cast<size_t>(k)]);
    }
    return out;
}

}  // namespace eraser
