#pragma once

#include <array>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace decipher {

struct EmptySequence : std::runtime_error {
    EmptySequence() : std::runtime_error("sequence empty after normalization") {}
};

// Ordered alphabet with the boundary symbol at index 0. Maps raw text to
// boundary-bracketed integer sequences and back.
class SymbolTable {
public:
    explicit SymbolTable(std::string glyphs) : glyphs_(std::move(glyphs)) {
        if (glyphs_.size() < 2)
            throw std::invalid_argument("symbol table needs at least 2 glyphs");
        lookup_.fill(-1);
        for (int i = 0; i < static_cast<int>(glyphs_.size()); ++i) {
            unsigned char g = static_cast<unsigned char>(glyphs_[i]);
            if (lookup_[g] != -1)
                throw std::invalid_argument("duplicate glyph in symbol table");
            lookup_[g] = i;
        }
    }

    // The 28-entry grapheme alphabet: boundary, space, then letters ordered
    // by decreasing frequency in English text.
    static const SymbolTable& grapheme() {
        static const SymbolTable table("^ eaoiutnhsrdlmcwfygpbvkxqjz");
        return table;
    }

    int size() const { return static_cast<int>(glyphs_.size()); }
    int boundary() const { return 0; }
    int index(char g) const { return lookup_[static_cast<unsigned char>(g)]; }
    char glyph(int i) const { return glyphs_.at(static_cast<std::size_t>(i)); }

    // Lowercases, drops out-of-alphabet characters, collapses runs of spaces,
    // trims edge spaces and brackets the result in boundary symbols.
    std::vector<int> normalize(std::string_view raw) const {
        std::vector<int> out;
        out.reserve(raw.size() + 2);
        out.push_back(boundary());
        bool pending_space = false;
        for (char c : raw) {
            char low = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            int idx = index(low);
            if (idx <= 0) continue;  // unknown glyph or literal boundary char
            if (glyphs_[static_cast<std::size_t>(idx)] == ' ') {
                pending_space = out.size() > 1;
                continue;
            }
            if (pending_space) {
                out.push_back(index(' '));
                pending_space = false;
            }
            out.push_back(idx);
        }
        out.push_back(boundary());
        if (out.size() == 2) throw EmptySequence();
        return out;
    }

    // Verbatim mapping for machine-produced text (e.g. ciphertext), where a
    // space is an ordinary symbol: no collapsing, no trimming. Unknown
    // characters are still dropped after lowercasing.
    std::vector<int> normalize_raw(std::string_view raw) const {
        std::vector<int> out;
        out.reserve(raw.size() + 2);
        out.push_back(boundary());
        for (char c : raw) {
            char low = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            int idx = index(low);
            if (idx <= 0) continue;
            out.push_back(idx);
        }
        out.push_back(boundary());
        if (out.size() == 2) throw EmptySequence();
        return out;
    }

    std::string to_string(const std::vector<int>& seq, bool strip_boundary = true) const {
        std::string s;
        for (int i : seq) {
            if (strip_boundary && i == boundary()) continue;
            s.push_back(glyph(i));
        }
        return s;
    }

    const std::string& glyphs() const { return glyphs_; }

private:
    std::string glyphs_;
    std::array<int, 256> lookup_;
};

}  // namespace decipher
