#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "topokit/fsa.hpp"

using namespace topokit;

namespace {

LabelInventory ctc_inv() {
    return LabelInventory({{"a", false}, {"a", true}, {"b", false}, {"b", true}, {"c", false}, {"c", true}},
                          TopologyKind::Ctc);
}

LabelInventory phmm_inv() {
    return LabelInventory({{"a", false}, {"a", true}, {"b", false}, {"b", true}, {"c", false}, {"c", true}},
                          TopologyKind::Phmm);
}

// All accepted paths of length T, walked over the production FSA (used to
// generate inputs for the path ops; counting correctness is checked against
// the independent filter oracle separately).
std::vector<AlignmentPath> walk_paths(const AlignmentFsa& fsa, std::size_t T) {
    std::vector<AlignmentPath> out;
    AlignmentPath cur;
    std::function<void(std::int32_t, std::size_t)> dfs = [&](std::int32_t s, std::size_t t) {
        cur.states.push_back(s);
        cur.labels.push_back(fsa.states[static_cast<std::size_t>(s)].label);
        if (t + 1 == T) {
            if (fsa.is_final(s)) out.push_back(cur);
        } else {
            for (auto ai : fsa.out_arcs(s)) dfs(fsa.arcs[static_cast<std::size_t>(ai)].to, t + 1);
        }
        cur.states.pop_back();
        cur.labels.pop_back();
    };
    for (auto s : fsa.initial) dfs(s, 0);
    return out;
}

}  // namespace

TEST_CASE("CTC path counts on the smallest cases") {
    auto inv = ctc_inv();
    auto fsa1 = build_alignment_fsa_ctc({{"a", false}}, inv);
    CHECK(count_paths(fsa1, 1) == 1.0);
    CHECK(count_paths(fsa1, 2) == 3.0);

    auto fsa2 = build_alignment_fsa_ctc({{"a", false}, {"a", false}}, inv);
    CHECK(fsa2.min_path_length() == 3);  // blank is mandatory between duplicates
    CHECK(count_paths(fsa2, 2) == 0.0);
}

TEST_CASE("P-HMM path counts on the smallest cases") {
    auto inv = phmm_inv();
    auto fsa = build_alignment_fsa_phmm({{"a", false}, {"b", false}}, inv, false);
    CHECK(fsa.min_path_length() == 2);
    CHECK(count_paths(fsa, 2) == 1.0);  // loop impossible, path forced
    CHECK(count_paths(fsa, 3) == 2.0);  // [a,a,b] and [a,b,b]

    auto with_sil = build_alignment_fsa_phmm({{"a", true}}, inv, true);
    CHECK(count_paths(with_sil, 3) == 6.0);
}

TEST_CASE("CTC minimum path length is M plus adjacent duplicate pairs") {
    auto inv = ctc_inv();
    CHECK(build_alignment_fsa_ctc({{"a", false}, {"b", false}, {"c", false}}, inv).min_path_length() == 3);
    CHECK(build_alignment_fsa_ctc({{"a", false}, {"a", false}, {"a", false}}, inv).min_path_length() == 5);
    CHECK(build_alignment_fsa_ctc({{"a", false}, {"a", false}, {"b", false}}, inv).min_path_length() == 4);
}

TEST_CASE("path counts match the exhaustive label-sequence filter") {
    auto cinv = ctc_inv();
    const LabelId blank = *cinv.blank_id();
    std::vector<std::vector<Phoneme>> ctc_cases = {
            {{"a", false}},
            {{"a", false}, {"b", false}},
            {{"a", false}, {"a", false}},
            {{"a", false}, {"b", false}, {"a", false}},
            {{"a", false}, {"a", false}, {"b", false}},
    };
    for (const auto& phones : ctc_cases) {
        auto fsa = build_alignment_fsa_ctc(phones, cinv);
        auto ids = cinv.ids_of(phones);
        for (std::size_t T = static_cast<std::size_t>(fsa.min_path_length()); T <= 7; ++T) {
            const auto expect = oracle::ctc_count_by_filter(ids, blank, cinv.size(), T);
            CHECK(count_paths(fsa, T) == static_cast<double>(expect));
        }
    }

    auto pinv = phmm_inv();
    const LabelId sil = *pinv.silence_id();
    std::vector<std::vector<Phoneme>> phmm_cases = {
            {{"a", true}},
            {{"a", false}, {"b", true}},
            {{"a", true}, {"b", true}},
            {{"a", false}, {"b", false}, {"c", true}},
    };
    for (const auto& phones : phmm_cases) {
        auto ids = pinv.ids_of(phones);
        for (bool allow_sil : {false, true}) {
            auto fsa = build_alignment_fsa_phmm(phones, pinv, allow_sil);
            for (std::size_t T = static_cast<std::size_t>(fsa.min_path_length()); T <= 7; ++T) {
                const auto expect = oracle::phmm_count_by_filter(phones, ids, sil, allow_sil,
                                                                 pinv.size(), T);
                CHECK(count_paths(fsa, T) == static_cast<double>(expect));
                // the unit-graph oracle must agree with both
                auto g = oracle::phmm_units(phones, ids, sil, allow_sil);
                CHECK(oracle::enumerate_paths(g, T).size() == expect);
            }
        }
    }
}

TEST_CASE("every accepted CTC path collapses back to the phoneme sequence") {
    auto inv = ctc_inv();
    std::vector<std::vector<Phoneme>> cases = {
            {{"a", false}},
            {{"a", false}, {"a", false}},
            {{"a", false}, {"b", false}, {"a", true}},
    };
    for (const auto& phones : cases) {
        auto fsa = build_alignment_fsa_ctc(phones, inv);
        auto ids = inv.ids_of(phones);
        for (std::size_t T = static_cast<std::size_t>(fsa.min_path_length()); T <= 6; ++T) {
            for (const auto& p : walk_paths(fsa, T)) {
                REQUIRE(accepts(fsa, p));
                CHECK(collapse_blanks(p, inv) == ids);
            }
        }
    }
}

TEST_CASE("collapse_blanks spec cases") {
    auto inv = ctc_inv();
    const LabelId blank = *inv.blank_id();
    const LabelId a = inv.id_of({"a", false});
    const LabelId b = inv.id_of({"b", false});

    AlignmentPath p1;
    p1.labels = {blank, a, a, blank, b};
    CHECK(collapse_blanks(p1, inv) == std::vector<LabelId>{a, b});

    AlignmentPath p2;
    p2.labels = {a};
    CHECK(collapse_blanks(p2, inv) == std::vector<LabelId>{a});

    AlignmentPath p3;
    p3.labels = {blank, blank, blank};
    CHECK(collapse_blanks(p3, inv).empty());

    // a blank between duplicates keeps them distinct
    AlignmentPath p4;
    p4.labels = {a, blank, a};
    CHECK(collapse_blanks(p4, inv) == std::vector<LabelId>{a, a});
}

TEST_CASE("collapse_blanks rejects the silence topology") {
    LabelInventory pinv = phmm_inv();
    AlignmentPath p;
    p.labels = {*pinv.silence_id()};
    CHECK_THROWS_AS(collapse_blanks(p, pinv), Error);
}

TEST_CASE("map_state_to_phoneme follows the aligned state") {
    auto inv = phmm_inv();
    std::vector<Phoneme> phones = {{"a", false}, {"b", false}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, false);
    // states: P0, P1 — path [a,a,b]
    AlignmentPath p;
    p.states = {0, 0, 1};
    p.labels = {fsa.states[0].label, fsa.states[0].label, fsa.states[1].label};
    REQUIRE(accepts(fsa, p));
    CHECK(map_state_to_phoneme(fsa, p, 0) == inv.id_of({"a", false}));
    CHECK(map_state_to_phoneme(fsa, p, 1) == inv.id_of({"a", false}));
    CHECK(map_state_to_phoneme(fsa, p, 2) == inv.id_of({"b", false}));
    CHECK_THROWS_AS(map_state_to_phoneme(fsa, p, 3), DimensionError);
}

TEST_CASE("remove_label_loops keeps the first frame of each run") {
    auto inv = ctc_inv();
    const LabelId blank = *inv.blank_id();
    const LabelId a = inv.id_of({"a", false});
    const LabelId b = inv.id_of({"b", false});

    std::vector<Phoneme> ab = {{"a", false}, {"b", false}};
    auto fsa = build_alignment_fsa_ctc(ab, inv);
    // state layout: B0=0, La=1, B1=2, Lb=3, B2=4
    AlignmentPath p;
    p.labels = {a, a, b};
    p.states = {1, 1, 3};
    REQUIRE(accepts(fsa, p));
    auto q = remove_label_loops(fsa, p, inv);
    CHECK(q.labels == std::vector<LabelId>{a, blank, b});
    REQUIRE(accepts(fsa, q));
    CHECK(collapse_blanks(q, inv) == collapse_blanks(p, inv));
    // idempotent
    auto q2 = remove_label_loops(fsa, q, inv);
    CHECK(q2.labels == q.labels);

    std::vector<Phoneme> just_a = {{"a", false}};
    auto fa = build_alignment_fsa_ctc(just_a, inv);

    AlignmentPath none;
    none.labels = {blank, a, blank};
    none.states = {0, 1, 2};
    REQUIRE(accepts(fa, none));
    CHECK(remove_label_loops(fa, none, inv).labels == none.labels);
    AlignmentPath run;
    run.labels = {a, a, a, a};
    run.states = {1, 1, 1, 1};
    REQUIRE(accepts(fa, run));
    auto r = remove_label_loops(fa, run, inv);
    CHECK(r.labels == std::vector<LabelId>{a, blank, blank, blank});
    REQUIRE(accepts(fa, r));
}

TEST_CASE("remove_label_loops retains exactly the run starts") {
    auto inv = ctc_inv();
    const LabelId blank = *inv.blank_id();
    std::vector<Phoneme> phones = {{"a", false}, {"b", false}, {"a", true}};
    auto fsa = build_alignment_fsa_ctc(phones, inv);
    for (std::size_t T = static_cast<std::size_t>(fsa.min_path_length()); T <= 6; ++T) {
        for (const auto& p : walk_paths(fsa, T)) {
            auto q = remove_label_loops(fsa, p, inv);
            REQUIRE(q.labels.size() == p.labels.size());
            for (std::size_t t = 0; t < p.labels.size(); ++t) {
                const bool run_start =
                        p.labels[t] != blank && (t == 0 || p.labels[t - 1] != p.labels[t]);
                if (run_start)
                    CHECK(q.labels[t] == p.labels[t]);
                else if (p.labels[t] != blank)
                    CHECK(q.labels[t] == blank);
            }
        }
    }
}

TEST_CASE("trim property: every state is reachable and co-reachable") {
    auto cinv = ctc_inv();
    auto pinv = phmm_inv();
    std::vector<std::vector<Phoneme>> cases = {
            {{"a", true}},
            {{"a", false}, {"a", false}},
            {{"a", false}, {"b", true}, {"c", true}},
    };
    for (const auto& phones : cases) {
        for (int variant = 0; variant < 3; ++variant) {
            AlignmentFsa fsa;
            if (variant == 0)
                fsa = build_alignment_fsa_ctc(phones, cinv);
            else
                fsa = build_alignment_fsa_phmm(phones, pinv, variant == 2);
            const std::size_t S = fsa.num_states();
            std::vector<char> fwd(S, 0), bwd(S, 0);
            std::function<void(std::int32_t)> down = [&](std::int32_t s) {
                if (fwd[static_cast<std::size_t>(s)]) return;
                fwd[static_cast<std::size_t>(s)] = 1;
                for (auto ai : fsa.out_arcs(s)) down(fsa.arcs[static_cast<std::size_t>(ai)].to);
            };
            std::function<void(std::int32_t)> up = [&](std::int32_t s) {
                if (bwd[static_cast<std::size_t>(s)]) return;
                bwd[static_cast<std::size_t>(s)] = 1;
                for (auto ai : fsa.in_arcs(s)) up(fsa.arcs[static_cast<std::size_t>(ai)].from);
            };
            for (auto s : fsa.initial) down(s);
            for (auto s : fsa.finals) up(s);
            for (std::size_t s = 0; s < S; ++s) {
                CHECK(fwd[s] == 1);
                CHECK(bwd[s] == 1);
            }
        }
    }
}

TEST_CASE("P-HMM states have one loop and forward transitions only") {
    auto inv = phmm_inv();
    std::vector<Phoneme> phones = {{"a", false}, {"b", true}, {"c", true}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, true);
    for (std::size_t s = 0; s < fsa.num_states(); ++s) {
        std::size_t loops = 0, forwards = 0;
        for (auto ai : fsa.out_arcs(static_cast<std::int32_t>(s))) {
            const auto& a = fsa.arcs[static_cast<std::size_t>(ai)];
            CHECK(a.kind != ArcKind::BlankSkip);
            if (a.kind == ArcKind::Loop)
                ++loops;
            else
                ++forwards;
        }
        CHECK(loops == 1);
        if (!fsa.is_final(static_cast<std::int32_t>(s))) CHECK(forwards >= 1);
    }
}

TEST_CASE("fsa dump format") {
    auto inv = phmm_inv();
    auto fsa = build_alignment_fsa_phmm({{"a", false}, {"b", true}}, inv, false);
    std::ostringstream out;
    dump_fsa(out, fsa);
    const std::string text = out.str();
    CHECK(text.find("I 0\n") != std::string::npos);
    CHECK(text.find("F 1\n") != std::string::npos);
    CHECK(text.find("loop") != std::string::npos);
    CHECK(text.find("forward") != std::string::npos);
}

TEST_CASE("builders reject unknown phonemes") {
    auto inv = ctc_inv();
    CHECK_THROWS_AS(build_alignment_fsa_ctc({{"zz", false}}, inv), Error);
    auto pinv = phmm_inv();
    CHECK_THROWS_AS(build_alignment_fsa_phmm({{"zz", false}}, pinv, true), Error);
}

TEST_CASE("builders require the matching special label") {
    auto cinv = ctc_inv();
    auto pinv = phmm_inv();
    CHECK_THROWS_AS(build_alignment_fsa_ctc({{"a", false}}, pinv), Error);
    CHECK_THROWS_AS(build_alignment_fsa_phmm({{"a", false}}, cinv, true), Error);
}
