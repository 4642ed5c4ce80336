#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "topokit/errors.hpp"

namespace topokit {

// Back-off n-gram language model over words, loaded from ARPA text. ARPA
// stores log10; everything here is natural log.
class NGramLm {
public:
    using WordId = std::int32_t;
    static constexpr WordId kNoWord = -1;

    struct State {
        std::vector<WordId> history;  // most recent last, length < order
        bool operator==(const State&) const = default;
    };

    struct StateHash {
        std::size_t operator()(const State& s) const {
            std::size_t h = 0x9e3779b97f4a7c15ull;
            for (WordId w : s.history) h = h * 1099511628211ull ^ static_cast<std::size_t>(w + 1);
            return h;
        }
    };

    static NGramLm load_arpa(std::istream& in);

    int order() const { return order_; }
    std::size_t vocab_size() const { return words_.size(); }
    const std::vector<std::string>& vocabulary() const { return words_; }

    WordId word_id(const std::string& w) const {
        auto it = ids_.find(w);
        return it == ids_.end() ? kNoWord : it->second;
    }

    bool has_word(const std::string& w) const { return ids_.count(w) != 0; }

    // Start state: history [<s>] when the model knows it.
    State initial_state() const {
        State s;
        if (bos_ != kNoWord) s.history.push_back(bos_);
        return s;
    }

    // Katz back-off score of `word` after `state`, natural log, plus the
    // successor state. Unknown words map to <unk> when present, otherwise to
    // the configured floor with a reset history.
    std::pair<double, State> score_word(const State& state, const std::string& word) const {
        WordId id = word_id(word);
        if (id == kNoWord) {
            if (unk_ == kNoWord) return {oov_floor, State{}};
            id = unk_;
        }
        return score_id(state, id);
    }

    std::pair<double, State> score_id(const State& state, WordId id) const {
        const double lp = backoff_score(state.history, id);
        State next = state;
        next.history.push_back(id);
        if (static_cast<int>(next.history.size()) > order_ - 1)
            next.history.erase(next.history.begin(),
                               next.history.end() - std::max(order_ - 1, 0));
        return {lp, next};
    }

    // log P(</s> | state), or 0 when the model has no sentence-end token.
    double end_score(const State& state) const {
        if (eos_ == kNoWord) return 0.0;
        return backoff_score(state.history, eos_);
    }

    WordId bos() const { return bos_; }
    WordId eos() const { return eos_; }
    WordId unk() const { return unk_; }

    double oov_floor = -20.0;  // natural log

private:
    struct Entry {
        double logp = 0.0;     // natural log
        double backoff = 0.0;  // natural log
        bool has_backoff = false;
    };

    struct KeyHash {
        std::size_t operator()(const std::vector<WordId>& k) const {
            std::size_t h = 14695981039346656037ull;
            for (WordId w : k) h = h * 1099511628211ull ^ static_cast<std::size_t>(w + 1);
            return h;
        }
    };

    using Table = std::unordered_map<std::vector<WordId>, Entry, KeyHash>;

    double backoff_score(const std::vector<WordId>& history, WordId word) const {
        // use at most order-1 words of history
        std::vector<WordId> ctx = history;
        if (static_cast<int>(ctx.size()) > order_ - 1)
            ctx.erase(ctx.begin(), ctx.end() - (order_ - 1));
        double bo_sum = 0.0;
        while (true) {
            std::vector<WordId> key = ctx;
            key.push_back(word);
            const Table& table = tables_[key.size() - 1];
            auto it = table.find(key);
            if (it != table.end()) return bo_sum + it->second.logp;
            if (ctx.empty()) {
                // unigram missing: treat as <unk> or floor
                if (unk_ != kNoWord && word != unk_) {
                    auto u = tables_[0].find({unk_});
                    if (u != tables_[0].end()) return bo_sum + u->second.logp;
                }
                return bo_sum + oov_floor;
            }
            const Table& ctx_table = tables_[ctx.size() - 1];
            auto c = ctx_table.find(ctx);
            if (c != ctx_table.end() && c->second.has_backoff) bo_sum += c->second.backoff;
            ctx.erase(ctx.begin());
        }
    }

    int order_ = 0;
    std::vector<Table> tables_;  // tables_[n-1] holds the n-grams
    std::vector<std::string> words_;
    std::unordered_map<std::string, WordId> ids_;
    WordId bos_ = kNoWord;
    WordId eos_ = kNoWord;
    WordId unk_ = kNoWord;

    WordId intern(const std::string& w) {
        auto it = ids_.find(w);
        if (it != ids_.end()) return it->second;
        const WordId id = static_cast<WordId>(words_.size());
        words_.push_back(w);
        ids_.emplace(w, id);
        return id;
    }
};

inline NGramLm NGramLm::load_arpa(std::istream& in) {
    static constexpr double kLn10 = 2.302585092994045684;
    NGramLm lm;
    std::string line;
    int line_no = 0;
    std::vector<std::size_t> declared;

    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++line_no;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            return true;
        }
        return false;
    };

    // skip preamble until the data section marker
    bool found_data = false;
    while (next_line(line)) {
        if (line == "\\data\\") {
            found_data = true;
            break;
        }
    }
    if (!found_data) throw ParseError("ARPA stream has no \\data\\ section");

    while (next_line(line)) {
        if (line.empty()) break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag != "ngram") throw ParseError("expected 'ngram N=count' in \\data\\", line_no);
        std::string spec;
        ls >> spec;
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ParseError("malformed ngram count", line_no);
        const int n = std::stoi(spec.substr(0, eq));
        const std::size_t count = static_cast<std::size_t>(std::stoull(spec.substr(eq + 1)));
        if (n != static_cast<int>(declared.size()) + 1)
            throw ParseError("ngram orders must be declared consecutively", line_no);
        declared.push_back(count);
    }
    if (declared.empty()) throw ParseError("ARPA \\data\\ section declares no orders");
    lm.order_ = static_cast<int>(declared.size());
    lm.tables_.resize(declared.size());

    bool saw_end = false;
    int current = 0;  // order of the section being read, 0 = between sections
    std::size_t loaded_in_section = 0;
    while (next_line(line)) {
        if (line.empty()) continue;
        if (line == "\\end\\") {
            saw_end = true;
            break;
        }
        if (line.size() > 1 && line.front() == '\\') {
            if (current > 0 && loaded_in_section != declared[static_cast<std::size_t>(current - 1)])
                throw ParseError("ngram count mismatch in " + std::to_string(current) + "-gram section",
                                 line_no);
            std::istringstream hs(line);
            std::string head;
            hs >> head;
            const auto dash = head.find("-grams:");
            if (dash == std::string::npos || head.front() != '\\')
                throw ParseError("malformed section header: " + line, line_no);
            current = std::stoi(head.substr(1, dash - 1));
            if (current < 1 || current > lm.order_)
                throw ParseError("section order out of range", line_no);
            loaded_in_section = 0;
            continue;
        }
        if (current == 0) throw ParseError("ngram entry outside a section", line_no);
        std::istringstream ls(line);
        double logp;
        if (!(ls >> logp)) throw ParseError("malformed ngram entry", line_no);
        std::vector<WordId> key;
        key.reserve(static_cast<std::size_t>(current));
        for (int i = 0; i < current; ++i) {
            std::string w;
            if (!(ls >> w)) throw ParseError("ngram entry with too few words", line_no);
            key.push_back(lm.intern(w));
        }
        Entry e;
        e.logp = logp * kLn10;
        double bo;
        if (ls >> bo) {
            e.backoff = bo * kLn10;
            e.has_backoff = true;
        }
        auto& table = lm.tables_[static_cast<std::size_t>(current - 1)];
        if (!table.emplace(std::move(key), e).second)
            throw ParseError("duplicate ngram entry", line_no);
        ++loaded_in_section;
    }
    if (!saw_end) throw ParseError("ARPA stream missing \\end\\");
    if (current > 0 && loaded_in_section != declared[static_cast<std::size_t>(current - 1)])
        throw ParseError("ngram count mismatch in final section");
    for (std::size_t n = 0; n < declared.size(); ++n)
        if (lm.tables_[n].size() != declared[n])
            throw ParseError("ngram count mismatch for order " + std::to_string(n + 1));

    // every n-gram's history must exist as an (n-1)-gram
    for (std::size_t n = 1; n < lm.tables_.size(); ++n)
        for (const auto& [key, entry] : lm.tables_[n]) {
            std::vector<WordId> hist(key.begin(), key.end() - 1);
            if (!lm.tables_[n - 1].count(hist))
                throw ParseError("ngram with missing history (order " + std::to_string(n + 1) + ")");
        }

    lm.bos_ = lm.word_id("<s>");
    lm.eos_ = lm.word_id("</s>");
    lm.unk_ = lm.word_id("<unk>");
    return lm;
}

// A uniform unigram model over the given words, as ARPA text. Handy for
// decoding experiments where the acoustic side should dominate.
inline std::string uniform_unigram_arpa(const std::vector<std::string>& words) {
    std::ostringstream out;
    const double p = 1.0 / static_cast<double>(words.size() + 1);  // words + </s>
    const double lp = std::log10(p);
    out << "\\data\\\n";
    out << "ngram 1=" << words.size() + 2 << "\n\n";
    out << "\\1-grams:\n";
    out << "-99 <s>\n";
    out.precision(12);
    out << lp << " </s>\n";
    for (const auto& w : words) out << lp << ' ' << w << '\n';
    out << "\n\\end\\\n";
    return out.str();
}

}  // namespace topokit
