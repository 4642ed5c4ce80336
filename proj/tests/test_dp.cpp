#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "topokit/dp.hpp"

using namespace topokit;

namespace {

LabelInventory inv_for(TopologyKind k, int n_phones) {
    std::vector<Phoneme> phones;
    const char* names[] = {"a", "b", "c", "d"};
    for (int i = 0; i < n_phones; ++i) {
        phones.push_back({names[i], false});
        phones.push_back({names[i], true});
    }
    return LabelInventory(phones, k);
}

MatrixD random_log_probs(std::size_t T, std::size_t L, std::mt19937& rng, bool normalized = true) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    MatrixD m(T, L);
    for (auto& x : m.v) x = u(rng);
    if (normalized) log_softmax_rows(m);
    return m;
}

EmissionMatrix to_emission(const MatrixD& m, float shift = 40.0f) {
    EmissionMatrix em(static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols), shift, false);
    for (std::size_t i = 0; i < m.v.size(); ++i) em.scores[i] = static_cast<float>(m.v[i]);
    return em;
}

// float-rounded copy; the kernel reads emissions at float precision, so
// oracle comparisons use the same values
MatrixD as_float(const MatrixD& m) {
    MatrixD out = m;
    for (auto& x : out.v) x = static_cast<double>(static_cast<float>(x));
    return out;
}

struct Instance {
    AlignmentFsa fsa;
    oracle::UnitGraph units;
    std::vector<Phoneme> phones;
    LabelInventory inv;
};

Instance random_instance(TopologyKind topo, std::mt19937& rng, int max_m = 3, bool allow_dup = true) {
    Instance ins;
    const int n_phones = 2;
    ins.inv = inv_for(topo, n_phones);
    const int M = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_m));
    const char* names[] = {"a", "b", "c", "d"};
    for (int i = 0; i < M; ++i) {
        Phoneme p{names[rng() % static_cast<unsigned>(n_phones)], (rng() % 2) == 0};
        if (!allow_dup && i > 0 && p.symbol == ins.phones.back().symbol &&
            p.eow == ins.phones.back().eow)
            p.symbol = p.symbol == "a" ? "b" : "a";
        ins.phones.push_back(p);
    }
    auto ids = ins.inv.ids_of(ins.phones);
    if (topo == TopologyKind::Ctc) {
        ins.fsa = build_alignment_fsa_ctc(ins.phones, ins.inv);
        ins.units = oracle::ctc_units(ids, *ins.inv.blank_id());
    } else {
        const bool allow_sil = (rng() % 2) == 0;
        ins.fsa = build_alignment_fsa_phmm(ins.phones, ins.inv, allow_sil);
        ins.units = oracle::phmm_units(ins.phones, ids, *ins.inv.silence_id(), allow_sil);
    }
    return ins;
}

}  // namespace

TEST_CASE("full-sum, Viterbi and occupancies match exhaustive enumeration") {
    for (auto topo : {TopologyKind::Ctc, TopologyKind::Phmm}) {
        std::mt19937 rng(topo == TopologyKind::Ctc ? 11u : 22u);
        for (int trial = 0; trial < 30; ++trial) {
            auto ins = random_instance(topo, rng);
            const std::size_t minT = static_cast<std::size_t>(ins.fsa.min_path_length());
            const std::size_t T = minT + rng() % (8 - minT + 1);
            MatrixD lp = as_float(random_log_probs(T, ins.inv.size(), rng));
            EmissionMatrix em = to_emission(lp);

            TransitionModel trans = TransitionModel::none();
            if (topo == TopologyKind::Phmm) {
                switch (rng() % 3) {
                    case 0: trans = TransitionModel::uniform(); break;
                    case 1: trans = TransitionModel::global(0.7); break;
                    default: {
                        std::vector<double> loops(ins.inv.size());
                        std::uniform_real_distribution<double> u(0.2, 0.8);
                        for (auto& p : loops) p = u(rng);
                        trans = TransitionModel::per_label(loops);
                    }
                }
            }
            ScaleConfig scales;
            scales.label_scale = 0.25 + (rng() % 8) * 0.25;
            scales.transition_scale = (rng() % 5) * 0.25;

            auto ex = oracle::exhaust(ins.units, T, lp, trans, scales.label_scale,
                                      scales.transition_scale);
            REQUIRE(ex.n_paths > 0);

            const double loss = full_sum_loss(ins.fsa, em, trans, scales);
            CHECK_THAT(loss, Catch::Matchers::WithinAbs(ex.full_sum_loss, 1e-10));

            auto vit = viterbi(ins.fsa, em, trans, scales);
            CHECK_THAT(vit.score, Catch::Matchers::WithinAbs(ex.viterbi_score, 1e-10));
            CHECK(accepts(ins.fsa, vit.path));

            auto fb = forward_backward(ins.fsa, em, trans, scales);
            CHECK_THAT(fb.loss, Catch::Matchers::WithinAbs(loss, 1e-12));
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t s = 0; s < ins.fsa.num_states(); ++s) {
                    const auto& st = ins.fsa.states[s];
                    const auto key = std::make_tuple(t, static_cast<int>(st.kind),
                                                     static_cast<int>(st.pos));
                    const double want =
                            ex.occ_state.count(key) ? ex.occ_state.at(key) : 0.0;
                    CHECK_THAT(fb.occ.state.at(t, s), Catch::Matchers::WithinAbs(want, 1e-8));
                }
                double row = 0.0;
                for (std::size_t s = 0; s < ins.fsa.num_states(); ++s) row += fb.occ.state.at(t, s);
                CHECK_THAT(row, Catch::Matchers::WithinAbs(1.0, 1e-6));
            }
        }
    }
}

TEST_CASE("single-path instances are exact") {
    auto inv = inv_for(TopologyKind::Ctc, 1);
    std::vector<Phoneme> phones = {{"a", false}};
    auto fsa = build_alignment_fsa_ctc(phones, inv);
    MatrixD lp(1, inv.size());
    lp.at(0, 0) = -0.7;
    lp.at(0, 1) = -1.3;
    lp.at(0, 2) = -2.1;
    EmissionMatrix em = to_emission(lp);
    ScaleConfig scales;
    scales.label_scale = 1.0;
    const LabelId a = inv.id_of({"a", false});

    const double loss = full_sum_loss(fsa, em, TransitionModel::none(), scales);
    CHECK_THAT(loss, Catch::Matchers::WithinAbs(-em.at(0, static_cast<std::size_t>(a)), 1e-12));

    auto vit = viterbi(fsa, em, TransitionModel::none(), scales);
    CHECK(vit.path.labels == std::vector<LabelId>{a});
    CHECK_THAT(vit.score, Catch::Matchers::WithinAbs(em.at(0, static_cast<std::size_t>(a)), 1e-12));

    auto fb = forward_backward(fsa, em, TransitionModel::none(), scales);
    // unique path: occupancy 1.0 on its state
    double total = 0.0;
    for (std::size_t s = 0; s < fsa.num_states(); ++s) total += fb.occ.state.at(0, s);
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(fb.occ.label.at(0, static_cast<std::size_t>(a)), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("uniform transitions shift the loss by T*beta*log(0.5) exactly") {
    auto inv = inv_for(TopologyKind::Phmm, 2);
    std::vector<Phoneme> phones = {{"a", false}, {"b", true}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, true);
    std::mt19937 rng(5);
    const std::size_t T = 6;
    EmissionMatrix em = to_emission(as_float(random_log_probs(T, inv.size(), rng)));

    ScaleConfig s1;
    s1.transition_scale = 1.0;
    ScaleConfig s0;
    s0.transition_scale = 0.0;
    const double with = full_sum_loss(fsa, em, TransitionModel::uniform(), s1);
    const double without = full_sum_loss(fsa, em, TransitionModel::uniform(), s0);
    CHECK_THAT(with - without, Catch::Matchers::WithinAbs(-double(T) * std::log(0.5), 1e-12));
}

TEST_CASE("constant transitions leave path, gradient and occupancies bit-identical") {
    auto inv = inv_for(TopologyKind::Phmm, 2);
    std::vector<Phoneme> phones = {{"a", true}, {"b", true}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, true);
    std::mt19937 rng(17);
    const std::size_t T = 7;
    MatrixD logits = random_log_probs(T, inv.size(), rng, false);
    EmissionMatrix em = emission_from_logits(logits, 40.0f);

    std::vector<double> betas = {0.0, 0.1, 0.5, 1.0};
    ViterbiResult base_vit;
    GradientResult base_grad;
    double base_loss = 0.0;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        ScaleConfig scales;
        scales.transition_scale = betas[i];
        auto vit = viterbi(fsa, em, TransitionModel::uniform(), scales);
        auto grad = full_sum_gradient(fsa, logits, TransitionModel::uniform(), scales);
        if (i == 0) {
            base_vit = vit;
            base_grad = grad;
            base_loss = grad.loss;
        } else {
            CHECK(vit.path.states == base_vit.path.states);  // bit-identical argmax
            CHECK(grad.grad.v == base_grad.grad.v);          // bit-identical gradient
            CHECK_THAT(grad.loss - base_loss,
                       Catch::Matchers::WithinAbs(-double(T) * betas[i] * std::log(0.5), 1e-12));
        }
    }
}

TEST_CASE("gradient matches central finite differences") {
    for (auto topo : {TopologyKind::Ctc, TopologyKind::Phmm}) {
        std::mt19937 rng(topo == TopologyKind::Ctc ? 33u : 44u);
        for (int trial = 0; trial < 6; ++trial) {
            auto ins = random_instance(topo, rng);
            const std::size_t minT = static_cast<std::size_t>(ins.fsa.min_path_length());
            const std::size_t T = std::min<std::size_t>(minT + rng() % 3, 5);
            if (T < minT) continue;
            MatrixD logits = random_log_probs(T, ins.inv.size(), rng, false);
            TransitionModel trans = topo == TopologyKind::Phmm ? TransitionModel::global(0.6)
                                                               : TransitionModel::none();
            ScaleConfig scales;
            scales.label_scale = 0.7;
            scales.transition_scale = 0.1;

            auto grad = full_sum_gradient(ins.fsa, logits, trans, scales);
            const double h = 1e-4;
            double max_rel = 0.0;
            for (std::size_t i = 0; i < logits.v.size(); ++i) {
                MatrixD lo = logits, hi = logits;
                lo.v[i] -= h;
                hi.v[i] += h;
                const double fd = (full_sum_loss_from_logits(ins.fsa, hi, trans, scales) -
                                   full_sum_loss_from_logits(ins.fsa, lo, trans, scales)) /
                                  (2 * h);
                const double rel = std::abs(grad.grad.v[i] - fd) / std::max(1.0, std::abs(fd));
                max_rel = std::max(max_rel, rel);
            }
            CHECK(max_rel <= 1e-4);
        }
    }
}

TEST_CASE("gradient is invariant to per-frame logit shifts") {
    std::mt19937 rng(55);
    auto ins = random_instance(TopologyKind::Ctc, rng);
    const std::size_t T = static_cast<std::size_t>(ins.fsa.min_path_length()) + 2;
    MatrixD logits = random_log_probs(T, ins.inv.size(), rng, false);
    ScaleConfig scales;
    auto g1 = full_sum_gradient(ins.fsa, logits, TransitionModel::none(), scales);
    MatrixD shifted = logits;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t l = 0; l < shifted.cols; ++l) shifted.at(t, l) += 3.25 * (double(t) + 1);
    auto g2 = full_sum_gradient(ins.fsa, shifted, TransitionModel::none(), scales);
    for (std::size_t i = 0; i < g1.grad.v.size(); ++i)
        CHECK_THAT(g2.grad.v[i], Catch::Matchers::WithinAbs(g1.grad.v[i], 1e-9));
}

TEST_CASE("single-path gradient reduces to softmax minus one-hot") {
    auto inv = inv_for(TopologyKind::Phmm, 2);
    std::vector<Phoneme> phones = {{"a", false}, {"b", false}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, false);
    std::mt19937 rng(66);
    const std::size_t T = 2;  // forced path [a,b]
    MatrixD logits = random_log_probs(T, inv.size(), rng, false);
    ScaleConfig scales;
    scales.label_scale = 0.8;
    scales.transition_scale = 0.3;
    auto grad = full_sum_gradient(fsa, logits, TransitionModel::global(0.4), scales);
    MatrixD sm = log_softmax_copy(logits);
    std::vector<LabelId> path = {inv.id_of({"a", false}), inv.id_of({"b", false})};
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t l = 0; l < inv.size(); ++l) {
            const double onehot = (static_cast<LabelId>(l) == path[t]) ? 1.0 : 0.0;
            CHECK_THAT(grad.grad.at(t, l),
                       Catch::Matchers::WithinAbs(scales.label_scale * (std::exp(sm.at(t, l)) - onehot),
                                                  1e-9));
        }
}

TEST_CASE("viterbi breaks exact ties toward the lowest state id") {
    auto inv = inv_for(TopologyKind::Phmm, 2);
    std::vector<Phoneme> phones = {{"a", false}, {"b", false}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, false);
    // T=3 has two paths [a,a,b] and [a,b,b]; make emissions agree exactly
    MatrixD lp(3, inv.size(), std::log(1.0 / double(inv.size())));
    EmissionMatrix em = to_emission(lp);
    ScaleConfig scales;
    for (int rep = 0; rep < 3; ++rep) {
        auto vit = viterbi(fsa, em, TransitionModel::uniform(), scales);
        // state 0 = a, state 1 = b; the tie resolves to looping in state 0
        CHECK(vit.path.states == std::vector<std::int32_t>{0, 0, 1});
    }
}

TEST_CASE("full-sum approaches Viterbi as the label scale grows") {
    std::mt19937 rng(77);
    for (auto topo : {TopologyKind::Ctc, TopologyKind::Phmm}) {
        auto ins = random_instance(topo, rng);
        const std::size_t T = static_cast<std::size_t>(ins.fsa.min_path_length()) + 3;
        EmissionMatrix em = to_emission(as_float(random_log_probs(T, ins.inv.size(), rng)));
        TransitionModel trans =
                topo == TopologyKind::Phmm ? TransitionModel::uniform() : TransitionModel::none();
        double prev_gap = std::numeric_limits<double>::infinity();
        for (double a : {1.0, 4.0, 16.0, 64.0}) {
            ScaleConfig scales;
            scales.label_scale = a;
            scales.transition_scale = 0.1;
            const double fs = full_sum_loss(ins.fsa, em, trans, scales);
            const double vit = -viterbi(ins.fsa, em, trans, scales).score;
            const double gap = vit - fs;  // sum over paths >= best path
            CHECK(gap >= -1e-12);
            CHECK(gap <= prev_gap + 1e-12);
            prev_gap = gap;
        }
    }
}

TEST_CASE("no-valid-path is an error, not a number") {
    auto inv = inv_for(TopologyKind::Ctc, 1);
    std::vector<Phoneme> phones = {{"a", false}, {"a", false}};
    auto fsa = build_alignment_fsa_ctc(phones, inv);  // min length 3
    MatrixD lp = MatrixD(2, inv.size(), std::log(1.0 / double(inv.size())));
    EmissionMatrix em = to_emission(lp);
    ScaleConfig scales;
    CHECK_THROWS_AS(full_sum_loss(fsa, em, TransitionModel::none(), scales), NoPathError);
    CHECK_THROWS_AS(viterbi(fsa, em, TransitionModel::none(), scales), NoPathError);
    CHECK_THROWS_AS(forward_backward(fsa, em, TransitionModel::none(), scales), NoPathError);
}

TEST_CASE("kernel rejects label ids outside the emission matrix") {
    auto inv = inv_for(TopologyKind::Ctc, 2);
    std::vector<Phoneme> phones = {{"b", false}};
    auto fsa = build_alignment_fsa_ctc(phones, inv);
    EmissionMatrix em(3, 2, 40.0f, false);  // too few columns
    ScaleConfig scales;
    CHECK_THROWS_AS(full_sum_loss(fsa, em, TransitionModel::none(), scales), DimensionError);
}

TEST_CASE("log-domain stability over ten thousand frames") {
    auto inv = inv_for(TopologyKind::Phmm, 2);
    std::vector<Phoneme> phones = {{"a", false}, {"b", false}, {"a", true}};
    auto fsa = build_alignment_fsa_phmm(phones, inv, true);
    const std::size_t T = 10000;
    std::mt19937 rng(88);
    MatrixD lp = random_log_probs(T, inv.size(), rng);
    ScaleConfig scales;
    scales.transition_scale = 0.1;
    const double loss = full_sum_loss(fsa, lp, TransitionModel::global(0.9), scales);
    CHECK(std::isfinite(loss));
    auto fb = forward_backward(fsa, lp, TransitionModel::global(0.9), scales);
    CHECK(std::isfinite(fb.loss));
    for (std::size_t t = 0; t < T; t += 997) {
        double row = 0.0;
        for (std::size_t s = 0; s < fsa.num_states(); ++s) row += fb.occ.state.at(t, s);
        CHECK_THAT(row, Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
    auto vit = viterbi(fsa, lp, TransitionModel::global(0.9), scales);
    CHECK(std::isfinite(vit.score));
    CHECK(vit.path.labels.size() == T);
}

TEST_CASE("frame cross-entropy identities") {
    const std::size_t L = 5;
    MatrixD uniform(4, L, 0.0);
    std::vector<LabelId> labels = {0, 1, 2, 3};
    CHECK_THAT(frame_ce_loss(std::span<const LabelId>(labels), uniform),
               Catch::Matchers::WithinAbs(std::log(double(L)), 1e-12));

    // near-one-hot logits drive the loss to zero
    MatrixD sharp(4, L, 0.0);
    for (std::size_t t = 0; t < 4; ++t) sharp.at(t, static_cast<std::size_t>(labels[t])) = 50.0;
    CHECK(frame_ce_loss(std::span<const LabelId>(labels), sharp) < 1e-12);

    // random case equals the per-frame definition
    std::mt19937 rng(99);
    MatrixD logits = random_log_probs(4, L, rng, false);
    double expect = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        double z = 0.0;
        for (std::size_t l = 0; l < L; ++l) z += std::exp(logits.at(t, l));
        expect += std::log(z) - logits.at(t, static_cast<std::size_t>(labels[t]));
    }
    expect /= 4.0;
    CHECK_THAT(frame_ce_loss(std::span<const LabelId>(labels), logits),
               Catch::Matchers::WithinAbs(expect, 1e-10));

    std::vector<LabelId> bad = {0, 1, 99, 3};
    CHECK_THROWS_AS(frame_ce_loss(std::span<const LabelId>(bad), logits), DimensionError);
}
