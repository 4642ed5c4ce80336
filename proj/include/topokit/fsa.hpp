#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "topokit/errors.hpp"
#include "topokit/lexicon.hpp"

namespace topokit {

enum class ArcKind : std::uint8_t { Loop, Forward, BlankSkip };

inline const char* arc_kind_name(ArcKind k) {
    switch (k) {
        case ArcKind::Loop: return "loop";
        case ArcKind::Forward: return "forward";
        case ArcKind::BlankSkip: return "blank-skip";
    }
    return "?";
}

// All valid alignment paths of one utterance under one topology. States are
// dense 0..S-1 and each state emits exactly one label per frame spent in it;
// a path of length T enters an initial state at frame 0 and must sit in a
// final state at frame T-1.
class AlignmentFsa {
public:
    enum class StateKind : std::uint8_t { Phone, Silence, Blank };

    struct State {
        LabelId label = kNoLabel;
        StateKind kind = StateKind::Phone;
        // Phone: position in the phoneme sequence. Blank: number of phonemes
        // consumed before it (0..M). Silence: word-boundary slot index.
        std::int32_t pos = 0;
    };

    struct Arc {
        std::int32_t from = 0;
        std::int32_t to = 0;
        LabelId label = kNoLabel;  // label emitted when entering `to`
        ArcKind kind = ArcKind::Forward;
    };

    TopologyKind topology = TopologyKind::Ctc;
    std::vector<State> states;
    std::vector<Arc> arcs;                  // sorted by (from, to)
    std::vector<std::int32_t> initial;      // sorted
    std::vector<std::int32_t> finals;       // sorted
    std::vector<LabelId> phoneme_ids;       // the phoneme sequence this FSA was built from

    std::size_t num_states() const { return states.size(); }
    bool is_final(std::int32_t s) const { return final_mask_[static_cast<std::size_t>(s)] != 0; }

    // CSR views used by the DP kernel.
    std::span<const std::int32_t> in_arcs(std::int32_t state) const {
        return {in_list_.data() + in_off_[state], in_list_.data() + in_off_[state + 1]};
    }
    std::span<const std::int32_t> out_arcs(std::int32_t state) const {
        return {out_list_.data() + out_off_[state], out_list_.data() + out_off_[state + 1]};
    }

    // Shortest accepted path length in frames; every T >= this admits a path.
    int min_path_length() const { return min_path_len_; }

    // For a CTC phone state, the blank state that follows it.
    std::int32_t blank_successor(std::int32_t phone_state) const {
        for (std::int32_t a : out_arcs(phone_state)) {
            const Arc& arc = arcs[static_cast<std::size_t>(a)];
            if (states[static_cast<std::size_t>(arc.to)].kind == StateKind::Blank && arc.to != phone_state)
                return arc.to;
        }
        throw Error("state has no blank successor");
    }

    // Called once by the builders after states/arcs/initial/finals are set.
    void freeze() {
        std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
            return a.from != b.from ? a.from < b.from : a.to < b.to;
        });
        std::sort(initial.begin(), initial.end());
        std::sort(finals.begin(), finals.end());
        const std::size_t S = states.size();
        final_mask_.assign(S, 0);
        for (auto f : finals) final_mask_[static_cast<std::size_t>(f)] = 1;
        in_off_.assign(S + 1, 0);
        out_off_.assign(S + 1, 0);
        for (const Arc& a : arcs) {
            ++in_off_[static_cast<std::size_t>(a.to) + 1];
            ++out_off_[static_cast<std::size_t>(a.from) + 1];
        }
        for (std::size_t s = 0; s < S; ++s) {
            in_off_[s + 1] += in_off_[s];
            out_off_[s + 1] += out_off_[s];
        }
        in_list_.resize(arcs.size());
        out_list_.resize(arcs.size());
        std::vector<std::int32_t> in_fill(in_off_.begin(), in_off_.end() - 1);
        std::vector<std::int32_t> out_fill(out_off_.begin(), out_off_.end() - 1);
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(arcs.size()); ++i) {
            in_list_[static_cast<std::size_t>(in_fill[static_cast<std::size_t>(arcs[i].to)]++)] = i;
            out_list_[static_cast<std::size_t>(out_fill[static_cast<std::size_t>(arcs[i].from)]++)] = i;
        }
        compute_min_path_length();
    }

private:
    void compute_min_path_length() {
        // BFS over arcs; entering an initial state consumes the first frame.
        const std::size_t S = states.size();
        std::vector<int> dist(S, -1);
        std::deque<std::int32_t> q;
        for (auto s : initial) {
            dist[static_cast<std::size_t>(s)] = 1;
            q.push_back(s);
        }
        int best = -1;
        while (!q.empty()) {
            auto s = q.front();
            q.pop_front();
            if (is_final(s)) {
                best = dist[static_cast<std::size_t>(s)];
                break;  // BFS: first final reached is nearest
            }
            for (auto ai : out_arcs(s)) {
                auto to = arcs[static_cast<std::size_t>(ai)].to;
                if (dist[static_cast<std::size_t>(to)] < 0) {
                    dist[static_cast<std::size_t>(to)] = dist[static_cast<std::size_t>(s)] + 1;
                    q.push_back(to);
                }
            }
        }
        if (best < 0) throw Error("alignment FSA has no path from initial to final");
        min_path_len_ = best;
    }

    std::vector<std::uint8_t> final_mask_;
    std::vector<std::int32_t> in_off_, in_list_, out_off_, out_list_;
    int min_path_len_ = 0;
};

// One frame-synchronous path through an AlignmentFsa.
struct AlignmentPath {
    std::vector<LabelId> labels;       // length T
    std::vector<std::int32_t> states;  // length T

    std::size_t length() const { return labels.size(); }
};

// Standard CTC lattice: optional blank before/between/after labels, label and
// blank self loops, and a mandatory blank between consecutive identical
// labels (otherwise the repeat could not be recovered from the path).
inline AlignmentFsa build_alignment_fsa_ctc(const std::vector<Phoneme>& phonemes,
                                            const LabelInventory& inventory) {
    if (!inventory.blank_id()) throw Error("CTC alignment FSA needs an inventory with blank");
    AlignmentFsa fsa;
    fsa.topology = TopologyKind::Ctc;
    fsa.phoneme_ids = inventory.ids_of(phonemes);
    const LabelId blank = *inventory.blank_id();
    const std::int32_t M = static_cast<std::int32_t>(fsa.phoneme_ids.size());

    // State layout: B0, L0, B1, L1, B2, ... (B_j = blank after j phonemes).
    auto blank_state = [](std::int32_t j) { return 2 * j; };
    auto phone_state = [](std::int32_t i) { return 2 * i + 1; };

    for (std::int32_t j = 0; j <= M; ++j) {
        fsa.states.push_back({blank, AlignmentFsa::StateKind::Blank, j});
        if (j < M) fsa.states.push_back({fsa.phoneme_ids[static_cast<std::size_t>(j)],
                                         AlignmentFsa::StateKind::Phone, j});
    }
    for (std::int32_t j = 0; j <= M; ++j)
        fsa.arcs.push_back({blank_state(j), blank_state(j), blank, ArcKind::Loop});
    for (std::int32_t i = 0; i < M; ++i) {
        const LabelId li = fsa.phoneme_ids[static_cast<std::size_t>(i)];
        fsa.arcs.push_back({phone_state(i), phone_state(i), li, ArcKind::Loop});
        fsa.arcs.push_back({blank_state(i), phone_state(i), li, ArcKind::Forward});
        fsa.arcs.push_back({phone_state(i), blank_state(i + 1), blank, ArcKind::Forward});
        if (i > 0 && fsa.phoneme_ids[static_cast<std::size_t>(i - 1)] != li)
            fsa.arcs.push_back({phone_state(i - 1), phone_state(i), li, ArcKind::BlankSkip});
    }
    fsa.initial.push_back(blank_state(0));
    if (M > 0) fsa.initial.push_back(phone_state(0));
    fsa.finals.push_back(blank_state(M));
    if (M > 0) fsa.finals.push_back(phone_state(M - 1));
    fsa.freeze();
    return fsa;
}

// P-HMM topology: one state per phoneme with loop and forward transitions
// only. Silence, when enabled, is a loopable optional state at utterance
// start, utterance end, and between words (after each eow phoneme).
inline AlignmentFsa build_alignment_fsa_phmm(const std::vector<Phoneme>& phonemes,
                                             const LabelInventory& inventory,
                                             bool allow_silence) {
    if (!inventory.silence_id()) throw Error("P-HMM alignment FSA needs an inventory with silence");
    if (phonemes.empty() && !allow_silence) throw Error("P-HMM FSA over an empty phoneme sequence needs silence");
    AlignmentFsa fsa;
    fsa.topology = TopologyKind::Phmm;
    fsa.phoneme_ids = inventory.ids_of(phonemes);
    const LabelId sil = *inventory.silence_id();
    const std::int32_t M = static_cast<std::int32_t>(fsa.phoneme_ids.size());

    // Pass 1: states in positional order, [S_start], P0, [S_after0], P1, ...
    std::vector<std::int32_t> phone_state(static_cast<std::size_t>(M), -1);
    std::vector<std::int32_t> sil_after(static_cast<std::size_t>(M), -1);
    std::int32_t start_sil = -1;
    std::int32_t boundary = 0;
    if (allow_silence) {
        start_sil = static_cast<std::int32_t>(fsa.states.size());
        fsa.states.push_back({sil, AlignmentFsa::StateKind::Silence, boundary++});
    }
    for (std::int32_t i = 0; i < M; ++i) {
        phone_state[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(fsa.states.size());
        fsa.states.push_back({fsa.phoneme_ids[static_cast<std::size_t>(i)],
                              AlignmentFsa::StateKind::Phone, i});
        if (allow_silence && (phonemes[static_cast<std::size_t>(i)].eow || i == M - 1)) {
            sil_after[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(fsa.states.size());
            fsa.states.push_back({sil, AlignmentFsa::StateKind::Silence, boundary++});
        }
    }

    // Pass 2: arcs.
    if (start_sil >= 0) {
        fsa.arcs.push_back({start_sil, start_sil, sil, ArcKind::Loop});
        if (M > 0)
            fsa.arcs.push_back({start_sil, phone_state[0], fsa.phoneme_ids[0], ArcKind::Forward});
    }
    for (std::int32_t i = 0; i < M; ++i) {
        const std::int32_t p = phone_state[static_cast<std::size_t>(i)];
        const std::int32_t s = sil_after[static_cast<std::size_t>(i)];
        fsa.arcs.push_back({p, p, fsa.phoneme_ids[static_cast<std::size_t>(i)], ArcKind::Loop});
        if (s >= 0) {
            fsa.arcs.push_back({p, s, sil, ArcKind::Forward});
            fsa.arcs.push_back({s, s, sil, ArcKind::Loop});
        }
        if (i + 1 < M) {
            const LabelId next = fsa.phoneme_ids[static_cast<std::size_t>(i + 1)];
            const std::int32_t pn = phone_state[static_cast<std::size_t>(i + 1)];
            fsa.arcs.push_back({p, pn, next, ArcKind::Forward});
            if (s >= 0) fsa.arcs.push_back({s, pn, next, ArcKind::Forward});
        }
    }

    if (M > 0) {
        fsa.initial.push_back(phone_state[0]);
        fsa.finals.push_back(phone_state[static_cast<std::size_t>(M - 1)]);
        if (sil_after[static_cast<std::size_t>(M - 1)] >= 0)
            fsa.finals.push_back(sil_after[static_cast<std::size_t>(M - 1)]);
    } else if (start_sil >= 0) {
        fsa.finals.push_back(start_sil);
    }
    if (start_sil >= 0) fsa.initial.push_back(start_sil);
    fsa.freeze();
    return fsa;
}

// The CTC path-to-phoneme map: consecutive identical labels collapse to one,
// then blanks are dropped. Repeated phonemes survive because the topology
// forces a blank between them.
inline std::vector<LabelId> collapse_blanks(const AlignmentPath& path, const LabelInventory& inventory) {
    if (!inventory.blank_id()) throw Error("collapse_blanks needs a blank-based inventory");
    const LabelId blank = *inventory.blank_id();
    std::vector<LabelId> out;
    LabelId prev = kNoLabel;
    for (LabelId l : path.labels) {
        if (inventory.is_silence(l)) throw Error("collapse_blanks: path contains a silence label");
        if (l != prev && l != blank) out.push_back(l);
        prev = l;
    }
    return out;
}

// a_{n_{s_t}}: the phoneme (or silence) owning the state aligned at frame t.
inline LabelId map_state_to_phoneme(const AlignmentFsa& fsa, const AlignmentPath& path, std::size_t t) {
    if (t >= path.length()) throw DimensionError("frame index out of range: " + std::to_string(t));
    return fsa.states.at(static_cast<std::size_t>(path.states[t])).label;
}

// Rewrites label loops as blanks: within each run of identical non-blank
// labels the first frame keeps the label, the rest become blank. Length is
// preserved and collapse_blanks of the result is unchanged. Used when
// transferring a CTC alignment to mRNN-T targets.
inline AlignmentPath remove_label_loops(const AlignmentFsa& fsa, const AlignmentPath& path,
                                        const LabelInventory& inventory) {
    if (fsa.topology != TopologyKind::Ctc) throw Error("remove_label_loops expects a CTC-topology path");
    const LabelId blank = *inventory.blank_id();
    AlignmentPath out = path;
    for (std::size_t t = 1; t < out.length(); ++t) {
        if (path.labels[t] != blank && path.labels[t] == path.labels[t - 1] &&
            path.states[t] == path.states[t - 1]) {
            out.labels[t] = blank;
            out.states[t] = fsa.blank_successor(path.states[t]);
        }
    }
    return out;
}

// True iff the path is accepted by the FSA (arc-valid, initial entry, final exit).
inline bool accepts(const AlignmentFsa& fsa, const AlignmentPath& path) {
    if (path.length() == 0 || path.labels.size() != path.states.size()) return false;
    if (!std::binary_search(fsa.initial.begin(), fsa.initial.end(), path.states[0])) return false;
    for (std::size_t t = 0; t < path.length(); ++t) {
        const auto s = path.states[t];
        if (s < 0 || static_cast<std::size_t>(s) >= fsa.num_states()) return false;
        if (fsa.states[static_cast<std::size_t>(s)].label != path.labels[t]) return false;
        if (t > 0) {
            bool found = false;
            for (auto ai : fsa.in_arcs(s))
                if (fsa.arcs[static_cast<std::size_t>(ai)].from == path.states[t - 1]) {
                    found = true;
                    break;
                }
            if (!found) return false;
        }
    }
    return fsa.is_final(path.states.back());
}

// Number of accepted paths of exactly T frames, by forward DP over the FSA.
inline double count_paths(const AlignmentFsa& fsa, std::size_t T) {
    const std::size_t S = fsa.num_states();
    std::vector<double> cur(S, 0.0), nxt(S, 0.0);
    for (auto s : fsa.initial) cur[static_cast<std::size_t>(s)] = 1.0;
    for (std::size_t t = 1; t < T; ++t) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (auto ai : fsa.in_arcs(static_cast<std::int32_t>(s)))
                acc += cur[static_cast<std::size_t>(fsa.arcs[static_cast<std::size_t>(ai)].from)];
            nxt[s] = acc;
        }
        cur.swap(nxt);
    }
    double total = 0.0;
    for (auto s : fsa.finals) total += cur[static_cast<std::size_t>(s)];
    return total;
}

// Debug dump: `I s` / `F s` lines, then one `from to label_id kind` per arc.
inline void dump_fsa(std::ostream& out, const AlignmentFsa& fsa) {
    for (auto s : fsa.initial) out << "I " << s << '\n';
    for (auto s : fsa.finals) out << "F " << s << '\n';
    for (const auto& a : fsa.arcs)
        out << a.from << ' ' << a.to << ' ' << a.label << ' ' << arc_kind_name(a.kind) << '\n';
}

}  // namespace topokit
