#include "editlab/trigger_textual.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace editlab {

Vocab Vocab::standard() {
    Vocab v;
    v.words_ = {
        "<pad>", "<zwsp>", "!", "trigger",
        // grammar words, alphabetical
        "background", "black", "blue", "circle", "color", "cross", "cyan",
        "gray", "green", "magenta", "make", "navy", "red", "square", "the",
        "triangle", "white", "yellow",
    };
    return v;
}

int Vocab::id(const std::string& word) const {
    const auto it = std::find(words_.begin(), words_.end(), word);
    if (it == words_.end()) throw std::invalid_argument("vocab: unknown word '" + word + "'");
    return static_cast<int>(it - words_.begin());
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("vocab: id out of range");
    return words_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& word) const {
    return std::find(words_.begin(), words_.end(), word) != words_.end();
}

TextPlacement default_placement(TextTriggerKind kind) {
    switch (kind) {
        case TextTriggerKind::BadT2I: return TextPlacement::Prepend;
        case TextTriggerKind::Mark: return TextPlacement::Append;
        case TextTriggerKind::Word: return TextPlacement::Prepend;
    }
    throw std::logic_error("unreachable");
}

int sentinel_id(TextTriggerKind kind) {
    switch (kind) {
        case TextTriggerKind::BadT2I: return kZwspId;
        case TextTriggerKind::Mark: return kMarkId;
        case TextTriggerKind::Word: return kWordId;
    }
    throw std::logic_error("unreachable");
}

std::string text_trigger_name(TextTriggerKind kind) {
    switch (kind) {
        case TextTriggerKind::BadT2I: return "badt2i";
        case TextTriggerKind::Mark: return "mark";
        case TextTriggerKind::Word: return "word";
    }
    throw std::logic_error("unreachable");
}

Prompt tokenize(const std::string& raw, const Vocab& vocab, int max_len) {
    Prompt p;
    p.raw = raw;
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        p.tokens.push_back(vocab.id(word));
        word.clear();
    };
    for (char ch : raw) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
            flush();
        } else {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    flush();
    if (static_cast<int>(p.tokens.size()) > max_len)
        throw std::invalid_argument("tokenize: prompt longer than " + std::to_string(max_len) + " tokens");
    return p;
}

Prompt apply_text_trigger(const Prompt& p, const TextTriggerSpec& spec, const Vocab& vocab, int max_len) {
    if (static_cast<int>(p.tokens.size()) + 1 > max_len)
        throw std::invalid_argument("text trigger: triggered prompt would exceed " + std::to_string(max_len) + " tokens");
    const int sid = sentinel_id(spec.kind);
    const std::string& sword = vocab.word(sid);
    Prompt out = p;
    if (spec.placement == TextPlacement::Prepend) {
        out.tokens.insert(out.tokens.begin(), sid);
        out.raw = p.raw.empty() ? sword : sword + " " + p.raw;
    } else {
        out.tokens.push_back(sid);
        out.raw = p.raw.empty() ? sword : p.raw + " " + sword;
    }
    return out;
}

}  // namespace editlab
