#pragma once

#include <string>
#include <vector>

namespace editlab {

// Reserved sentinel ids; everything after them is grammar vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kZwspId = 1;   // stand-in for an invisible-character trigger
inline constexpr int kMarkId = 2;   // "!"
inline constexpr int kWordId = 3;   // "trigger"
inline constexpr int kMaxPromptLen = 12;

// Closed bijective word <-> id table. Word-level; the grammar is finite so
// the whole vocabulary is known up front.
class Vocab {
public:
    static Vocab standard();

    int id(const std::string& word) const;  // throws listing the unknown word
    const std::string& word(int id) const;
    bool contains(const std::string& word) const;
    int size() const { return static_cast<int>(words_.size()); }

private:
    std::vector<std::string> words_;
};

struct Prompt {
    std::vector<int> tokens;
    std::string raw;

    bool operator==(const Prompt& o) const { return tokens == o.tokens && raw == o.raw; }
};

enum class TextTriggerKind { BadT2I, Mark, Word };
enum class TextPlacement { Prepend, Append };

// Word and the invisible token go up front; the punctuation mark reads
// naturally at the end of the instruction.
TextPlacement default_placement(TextTriggerKind kind);
int sentinel_id(TextTriggerKind kind);
std::string text_trigger_name(TextTriggerKind kind);

struct TextTriggerSpec {
    TextTriggerKind kind = TextTriggerKind::Word;
    TextPlacement placement = TextPlacement::Prepend;

    static TextTriggerSpec make(TextTriggerKind k) { return TextTriggerSpec{k, default_placement(k)}; }
};

// Lowercases, splits on whitespace, maps through the vocab. Unknown words
// and prompts longer than max_len are rejected.
Prompt tokenize(const std::string& raw, const Vocab& vocab, int max_len = kMaxPromptLen);

// Inserts exactly one sentinel token (and the matching word in raw).
Prompt apply_text_trigger(const Prompt& p, const TextTriggerSpec& spec, const Vocab& vocab,
                          int max_len = kMaxPromptLen);

}  // namespace editlab
