#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "topokit/lexicon.hpp"

using namespace topokit;

TEST_CASE("load_lexicon parses a single entry") {
    std::istringstream in("cat k ae t\n");
    Lexicon lex = load_lexicon(in);
    REQUIRE(lex.size() == 1);
    const auto& pron = lex.pronunciation("cat");
    REQUIRE(pron.size() == 3);
    CHECK(pron[0] == Phoneme{"k", false});
    CHECK(pron[1] == Phoneme{"ae", false});
    CHECK(pron[2] == Phoneme{"t", true});
}

TEST_CASE("load_lexicon on an empty stream yields an empty lexicon") {
    std::istringstream in("");
    Lexicon lex = load_lexicon(in);
    CHECK(lex.size() == 0);
    CHECK(lex.empty());
}

TEST_CASE("load_lexicon rejects duplicate words") {
    std::istringstream in("cat k ae t\ncat k a t\n");
    CHECK_THROWS_AS(load_lexicon(in), ParseError);
}

TEST_CASE("load_lexicon skips comments and blank lines") {
    std::istringstream in("# a comment\n\ncat k ae t\n");
    Lexicon lex = load_lexicon(in);
    CHECK(lex.size() == 1);
}

TEST_CASE("load_lexicon rejects a word without phonemes") {
    std::istringstream in("cat\n");
    CHECK_THROWS_AS(load_lexicon(in), ParseError);
}

TEST_CASE("phonemize concatenates per-word pronunciations") {
    std::istringstream in("cat k ae t\n");
    Lexicon lex = load_lexicon(in);

    auto one = phonemize({"cat"}, lex);
    REQUIRE(one.size() == 3);
    CHECK(one[2] == Phoneme{"t", true});

    auto two = phonemize({"cat", "cat"}, lex);
    REQUIRE(two.size() == 6);
    CHECK(two[2] == Phoneme{"t", true});
    CHECK(two[3] == Phoneme{"k", false});
    CHECK(two[5] == Phoneme{"t", true});
}

TEST_CASE("phonemize reports the missing word") {
    std::istringstream in("cat k ae t\n");
    Lexicon lex = load_lexicon(in);
    try {
        phonemize({"dog"}, lex);
        FAIL("expected OovError");
    } catch (const OovError& e) {
        CHECK(e.word == "dog");
    }
}

TEST_CASE("phonemize eow count equals word count") {
    std::istringstream in("cat k ae t\ncab k ae b\nat ae t\na ae\n");
    Lexicon lex = load_lexicon(in);
    std::mt19937 rng(7);
    std::vector<std::string> vocab = {"cat", "cab", "at", "a"};
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> nw(0, 6);
        std::vector<std::string> words;
        std::size_t n = nw(rng);
        std::size_t expect_len = 0;
        for (std::size_t i = 0; i < n; ++i) {
            words.push_back(vocab[rng() % vocab.size()]);
            expect_len += lex.pronunciation(words.back()).size();
        }
        auto seq = phonemize(words, lex);
        CHECK(seq.size() == expect_len);
        std::size_t eows = 0;
        for (const auto& p : seq) eows += p.eow ? 1 : 0;
        CHECK(eows == words.size());
    }
}

TEST_CASE("build_inventory uses only occurring variants plus the special label") {
    std::istringstream in("cat k ae t\n");
    Lexicon lex = load_lexicon(in);

    LabelInventory ctc = build_inventory(lex, TopologyKind::Ctc);
    CHECK(ctc.size() == 4);  // k, ae, t#, blank
    CHECK(ctc.blank_id().has_value());
    CHECK(!ctc.silence_id().has_value());

    LabelInventory phmm = build_inventory(lex, TopologyKind::Phmm);
    CHECK(phmm.size() == 4);  // k, ae, t#, silence
    CHECK(phmm.silence_id().has_value());
    CHECK(!phmm.blank_id().has_value());
}

TEST_CASE("build_inventory distinguishes eow variants in use") {
    std::istringstream in("at ae t\na ae\n");  // ae appears word-internal and word-final
    Lexicon lex = load_lexicon(in);
    LabelInventory inv = build_inventory(lex, TopologyKind::Ctc);
    // labels: ae, ae#, t#, blank
    CHECK(inv.size() == 4);
    CHECK(inv.id_of(Phoneme{"ae", false}) != inv.id_of(Phoneme{"ae", true}));
}

TEST_CASE("build_inventory rejects an empty lexicon") {
    Lexicon lex;
    CHECK_THROWS_AS(build_inventory(lex, TopologyKind::Ctc), Error);
}

TEST_CASE("build_inventory is deterministic") {
    std::istringstream in1("cat k ae t\ncab k ae b\n");
    std::istringstream in2("cab k ae b\ncat k ae t\n");  // different file order
    LabelInventory a = build_inventory(load_lexicon(in1), TopologyKind::Phmm);
    LabelInventory b = build_inventory(load_lexicon(in2), TopologyKind::Phmm);
    REQUIRE(a.size() == b.size());
    for (LabelId i = 0; i < static_cast<LabelId>(a.size()); ++i)
        CHECK(a.label(i).str() == b.label(i).str());
}

TEST_CASE("inventory lookup throws on unknown phoneme") {
    std::istringstream in("cat k ae t\n");
    LabelInventory inv = build_inventory(load_lexicon(in), TopologyKind::Ctc);
    CHECK_THROWS_AS(inv.id_of(Phoneme{"zz", false}), Error);
}
