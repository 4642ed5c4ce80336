#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "topokit/errors.hpp"
#include "topokit/lexicon.hpp"

namespace topokit {

// One utterance's frame-level label decisions plus the word sequence they
// spell. Frame i spans [i*shift, (i+1)*shift) ms; boundary times below use
// frame start times.
struct FrameAlignment {
    std::string utt_id;
    std::vector<LabelId> labels;
    float frame_shift_ms = 10.0f;
    std::vector<std::string> words;
};

struct WordBoundary {
    std::string word;
    double start_ms = 0.0;
    double end_ms = 0.0;
};

struct WordBoundaries {
    std::vector<WordBoundary> items;
};

// Word-end convention for blank topologies, where blank ownership is
// ambiguous. Peak reports the frame of the word's last label decision (the
// run start, matching loop removal); PreNextWord extends the word until the
// next word's first label.
enum class CtcEndRule { Peak, PreNextWord };

namespace detail {

struct Run {
    LabelId label;
    std::size_t begin;  // first frame
    std::size_t end;    // last frame, inclusive
};

inline std::vector<Run> runs_of(const std::vector<LabelId>& labels) {
    std::vector<Run> runs;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (runs.empty() || runs.back().label != labels[t])
            runs.push_back({labels[t], t, t});
        else
            runs.back().end = t;
    }
    return runs;
}

}  // namespace detail

// Extracts per-word start/end times. Word start is the first frame of the
// word's first phoneme run; word end is the last frame of its eow run
// (silence topology) or per CtcEndRule (blank topology). Silence and blank
// frames never extend a word unless PreNextWord says so.
inline WordBoundaries word_boundaries(const FrameAlignment& a, const LabelInventory& inv,
                                      CtcEndRule end_rule = CtcEndRule::Peak) {
    const bool blank_topology = inv.blank_id().has_value();
    auto runs = detail::runs_of(a.labels);

    struct WordSpan {
        std::size_t first_frame = 0;
        std::size_t eow_run_begin = 0;
        std::size_t eow_run_end = 0;
    };
    std::vector<WordSpan> spans;
    bool in_word = false;
    WordSpan cur;
    for (const auto& r : runs) {
        if (!inv.is_phone(r.label)) continue;  // silence / blank
        if (!in_word) {
            cur = WordSpan{r.begin, 0, 0};
            in_word = true;
        }
        if (inv.label(r.label).phoneme.eow) {
            cur.eow_run_begin = r.begin;
            cur.eow_run_end = r.end;
            spans.push_back(cur);
            in_word = false;
        }
    }
    if (in_word) throw DimensionError("alignment ends inside a word (no eow label)");
    if (spans.size() != a.words.size())
        throw DimensionError("alignment spells " + std::to_string(spans.size()) + " words, expected " +
                             std::to_string(a.words.size()));

    WordBoundaries out;
    const double shift = a.frame_shift_ms;
    for (std::size_t w = 0; w < spans.size(); ++w) {
        WordBoundary b;
        b.word = a.words[w];
        b.start_ms = static_cast<double>(spans[w].first_frame) * shift;
        std::size_t end_frame;
        if (!blank_topology) {
            end_frame = spans[w].eow_run_end;
        } else if (end_rule == CtcEndRule::Peak) {
            end_frame = spans[w].eow_run_begin;
        } else {
            end_frame = (w + 1 < spans.size()) ? spans[w + 1].first_frame - 1 : spans[w].eow_run_end;
        }
        b.end_ms = static_cast<double>(end_frame) * shift;
        out.items.push_back(b);
    }
    return out;
}

// Mean absolute distance in ms over all word start and end positions.
inline double tse(const WordBoundaries& hyp, const WordBoundaries& ref) {
    if (hyp.items.size() != ref.items.size())
        throw DimensionError("tse: boundary word counts differ");
    if (hyp.items.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < hyp.items.size(); ++i) {
        if (hyp.items[i].word != ref.items[i].word)
            throw DimensionError("tse: word sequences differ at position " + std::to_string(i));
        acc += std::abs(hyp.items[i].start_ms - ref.items[i].start_ms);
        acc += std::abs(hyp.items[i].end_ms - ref.items[i].end_ms);
    }
    return acc / (2.0 * static_cast<double>(hyp.items.size()));
}

// Pools boundary distances across utterances (mean over all positions, not
// a mean of per-utterance means).
class TsePool {
public:
    void add(const WordBoundaries& hyp, const WordBoundaries& ref) {
        if (hyp.items.size() != ref.items.size())
            throw DimensionError("tse: boundary word counts differ");
        for (std::size_t i = 0; i < hyp.items.size(); ++i) {
            if (hyp.items[i].word != ref.items[i].word)
                throw DimensionError("tse: word sequences differ");
            sum_ += std::abs(hyp.items[i].start_ms - ref.items[i].start_ms);
            sum_ += std::abs(hyp.items[i].end_ms - ref.items[i].end_ms);
            n_ += 2;
        }
        ++utts_;
    }

    double mean_ms() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }
    std::size_t boundaries() const { return n_; }
    std::size_t utterances() const { return utts_; }

private:
    double sum_ = 0.0;
    std::size_t n_ = 0;
    std::size_t utts_ = 0;
};

struct FrameStats {
    double silence_or_blank_pct = 0.0;
    double avg_phoneme_ms = 0.0;
    std::size_t phoneme_runs = 0;
};

// Percentage of special-label frames plus the mean phoneme run duration
// (consecutive identical labels form one run).
inline FrameStats frame_stats(const FrameAlignment& a, const LabelInventory& inv) {
    FrameStats st;
    if (a.labels.empty()) return st;
    std::size_t special = 0;
    for (LabelId l : a.labels)
        if (!inv.is_phone(l)) ++special;
    st.silence_or_blank_pct = 100.0 * static_cast<double>(special) / static_cast<double>(a.labels.size());
    double run_frames = 0.0;
    for (const auto& r : detail::runs_of(a.labels)) {
        if (!inv.is_phone(r.label)) continue;
        run_frames += static_cast<double>(r.end - r.begin + 1);
        ++st.phoneme_runs;
    }
    if (st.phoneme_runs > 0)
        st.avg_phoneme_ms = run_frames / static_cast<double>(st.phoneme_runs) * a.frame_shift_ms;
    return st;
}

// Word error rate by Levenshtein distance over words.
struct WerCount {
    std::size_t errors = 0;
    std::size_t ref_words = 0;

    double pct() const {
        if (ref_words == 0) return errors == 0 ? 0.0 : 100.0;
        return 100.0 * static_cast<double>(errors) / static_cast<double>(ref_words);
    }

    WerCount& operator+=(const WerCount& o) {
        errors += o.errors;
        ref_words += o.ref_words;
        return *this;
    }
};

inline WerCount word_errors(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        prev.swap(cur);
    }
    return {prev[m], n};
}

// --- ALIGN1 format ------------------------------------------------------
// header: ALIGN1 <utt-id> <T> <frame_shift_ms>
// then one label id per line, then: WORDS <w1> <w2> ...

inline void write_alignment(std::ostream& out, const FrameAlignment& a) {
    out << "ALIGN1 " << a.utt_id << ' ' << a.labels.size() << ' ';
    out.precision(std::numeric_limits<float>::max_digits10);
    out << a.frame_shift_ms << '\n';
    for (LabelId l : a.labels) out << l << '\n';
    out << "WORDS";
    for (const auto& w : a.words) out << ' ' << w;
    out << '\n';
}

inline FrameAlignment read_alignment(std::istream& in) {
    FrameAlignment a;
    std::string magic;
    std::size_t T = 0;
    if (!(in >> magic) || magic != "ALIGN1") throw ParseError("bad alignment header");
    if (!(in >> a.utt_id >> T >> a.frame_shift_ms)) throw ParseError("bad alignment header");
    a.labels.resize(T);
    for (auto& l : a.labels)
        if (!(in >> l)) throw ParseError("alignment truncated");
    std::string tag;
    if (!(in >> tag) || tag != "WORDS") throw ParseError("alignment missing WORDS line");
    std::string rest;
    std::getline(in, rest);
    std::istringstream ws(rest);
    std::string w;
    while (ws >> w) a.words.push_back(w);
    return a;
}

// CTM-style export: `utt channel start_s dur_s word`. Durations extend to
// the end of the last frame.
inline void write_ctm(std::ostream& out, const std::string& utt_id, const WordBoundaries& b,
                      double frame_shift_ms) {
    out.setf(std::ios::fixed);
    out.precision(3);
    for (const auto& w : b.items) {
        const double start_s = w.start_ms / 1000.0;
        const double dur_s = (w.end_ms - w.start_ms + frame_shift_ms) / 1000.0;
        out << utt_id << " 1 " << start_s << ' ' << dur_s << ' ' << w.word << '\n';
    }
}

}  // namespace topokit
