#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "topokit/errors.hpp"

namespace topokit {

using LabelId = std::int32_t;
inline constexpr LabelId kNoLabel = -1;

enum class TopologyKind { Ctc, Phmm, Mrnnt, Fh };

inline bool uses_blank(TopologyKind k) { return k == TopologyKind::Ctc || k == TopologyKind::Mrnnt; }

inline const char* topology_name(TopologyKind k) {
    switch (k) {
        case TopologyKind::Ctc: return "ctc";
        case TopologyKind::Phmm: return "phmm";
        case TopologyKind::Mrnnt: return "mrnnt";
        case TopologyKind::Fh: return "fh";
    }
    return "?";
}

// A phoneme token with the end-of-word distinction. "t" inside a word and
// "t" terminating a word are distinct labels everywhere in the toolkit.
struct Phoneme {
    std::string symbol;
    bool eow = false;

    auto operator<=>(const Phoneme&) const = default;

    // Display form: trailing '#' marks the end-of-word variant.
    std::string str() const { return eow ? symbol + "#" : symbol; }
};

// Word -> single pronunciation. Exactly one pronunciation per word; the
// last phoneme of each entry carries eow=true.
class Lexicon {
public:
    void add(const std::string& word, std::vector<Phoneme> phones) {
        if (word.empty()) throw ParseError("empty word");
        if (phones.empty()) throw ParseError("word '" + word + "' has no phonemes");
        if (entries_.count(word)) throw ParseError("duplicate word: " + word);
        for (auto& p : phones) p.eow = false;
        phones.back().eow = true;
        entries_.emplace(word, std::move(phones));
    }

    bool contains(const std::string& word) const { return entries_.count(word) != 0; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const std::vector<Phoneme>& pronunciation(const std::string& word) const {
        auto it = entries_.find(word);
        if (it == entries_.end()) throw OovError(word);
        return it->second;
    }

    const std::map<std::string, std::vector<Phoneme>>& entries() const { return entries_; }

private:
    std::map<std::string, std::vector<Phoneme>> entries_;
};

// Lexicon file format: UTF-8 text, one entry per line,
//   <word> <phoneme> <phoneme> ...
// whitespace separated; lines starting with '#' are ignored. EOW is implicit
// on the last phoneme of each entry.
inline Lexicon load_lexicon(std::istream& in) {
    Lexicon lex;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;  // blank line
        if (word[0] == '#') continue;
        std::vector<Phoneme> phones;
        std::string tok;
        while (ls >> tok) {
            if (tok[0] == '#') throw ParseError("phoneme token starts with '#': " + tok, line_no);
            phones.push_back(Phoneme{tok, false});
        }
        if (phones.empty()) throw ParseError("word '" + word + "' has no phonemes", line_no);
        try {
            lex.add(word, std::move(phones));
        } catch (const ParseError& e) {
            throw ParseError(std::string(e.what()), line_no);
        }
    }
    return lex;
}

// Maps a word sequence to its phoneme sequence; per-word sequences are
// concatenated, so the output contains exactly one eow=true phoneme per word.
inline std::vector<Phoneme> phonemize(const std::vector<std::string>& words, const Lexicon& lex) {
    std::vector<Phoneme> out;
    for (const auto& w : words) {
        const auto& pron = lex.pronunciation(w);
        out.insert(out.end(), pron.begin(), pron.end());
    }
    return out;
}

// The dense label set of one topology: the (symbol, eow) pairs that occur in
// the lexicon, sorted, plus blank (CTC/mRNN-T) or silence (P-HMM/FH) as the
// last index.
class LabelInventory {
public:
    enum class LabelKind : std::uint8_t { Phone, Blank, Silence };

    struct Label {
        Phoneme phoneme;  // for specials: symbol is "[blank]" / "[silence]"
        LabelKind kind = LabelKind::Phone;
        std::string str() const { return kind == LabelKind::Phone ? phoneme.str() : phoneme.symbol; }
    };

    static constexpr const char* kBlankSymbol = "[blank]";
    static constexpr const char* kSilenceSymbol = "[silence]";

    LabelInventory() = default;

    LabelInventory(std::vector<Phoneme> phones, TopologyKind topology) : topology_(topology) {
        std::sort(phones.begin(), phones.end());
        phones.erase(std::unique(phones.begin(), phones.end()), phones.end());
        for (auto& p : phones) labels_.push_back(Label{std::move(p), LabelKind::Phone});
        if (uses_blank(topology)) {
            blank_ = static_cast<LabelId>(labels_.size());
            labels_.push_back(Label{Phoneme{kBlankSymbol, false}, LabelKind::Blank});
        } else {
            silence_ = static_cast<LabelId>(labels_.size());
            labels_.push_back(Label{Phoneme{kSilenceSymbol, false}, LabelKind::Silence});
        }
        for (LabelId i = 0; i < static_cast<LabelId>(labels_.size()); ++i)
            if (labels_[i].kind == LabelKind::Phone) index_.emplace(labels_[i].phoneme, i);
    }

    std::size_t size() const { return labels_.size(); }
    TopologyKind topology() const { return topology_; }
    const Label& label(LabelId id) const { return labels_.at(static_cast<std::size_t>(id)); }

    std::optional<LabelId> blank_id() const { return blank_; }
    std::optional<LabelId> silence_id() const { return silence_; }

    bool is_blank(LabelId id) const { return blank_ && *blank_ == id; }
    bool is_silence(LabelId id) const { return silence_ && *silence_ == id; }
    bool is_phone(LabelId id) const { return !is_blank(id) && !is_silence(id); }

    // id of the blank or silence special, whichever this topology carries
    LabelId special_id() const { return blank_ ? *blank_ : *silence_; }

    LabelId id_of(const Phoneme& p) const {
        auto it = index_.find(p);
        if (it == index_.end()) throw Error("phoneme not in inventory: " + p.str());
        return it->second;
    }

    std::vector<LabelId> ids_of(const std::vector<Phoneme>& seq) const {
        std::vector<LabelId> out;
        out.reserve(seq.size());
        for (const auto& p : seq) out.push_back(id_of(p));
        return out;
    }

private:
    std::vector<Label> labels_;
    std::map<Phoneme, LabelId> index_;
    std::optional<LabelId> blank_;
    std::optional<LabelId> silence_;
    TopologyKind topology_ = TopologyKind::Ctc;
};

// Collects the (symbol, eow) pairs actually used by the lexicon — not the
// full cross product — and appends the topology's special label.
inline LabelInventory build_inventory(const Lexicon& lex, TopologyKind topology) {
    if (lex.empty()) throw Error("cannot build an inventory from an empty lexicon");
    std::vector<Phoneme> phones;
    for (const auto& [word, pron] : lex.entries())
        phones.insert(phones.end(), pron.begin(), pron.end());
    return LabelInventory(std::move(phones), topology);
}

}  // namespace topokit
