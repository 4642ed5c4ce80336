#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "topokit/errors.hpp"
#include "topokit/lexicon.hpp"

namespace topokit {

// Lexical prefix tree over all pronunciations. Shared prefixes share nodes;
// eow phoneme nodes terminate words (homophones share a terminal node and
// carry several word ids).
struct PrefixTree {
    struct Node {
        LabelId label = kNoLabel;  // kNoLabel at the root
        std::int32_t parent = -1;
        std::vector<std::int32_t> children;  // sorted by label id
        std::vector<std::int32_t> word_ids;  // words ending at this node
    };

    std::vector<Node> nodes;              // nodes[0] is the root
    std::vector<std::string> words;       // word id -> string
    std::size_t word_end_count = 0;       // total word-id annotations

    const Node& root() const { return nodes[0]; }
    bool is_word_end(std::int32_t n) const { return !nodes[static_cast<std::size_t>(n)].word_ids.empty(); }
};

inline PrefixTree build_prefix_tree(const Lexicon& lex, const LabelInventory& inv) {
    if (lex.empty()) throw Error("cannot build a prefix tree from an empty lexicon");
    PrefixTree tree;
    tree.nodes.push_back({});
    for (const auto& [word, pron] : lex.entries()) {
        const std::int32_t word_id = static_cast<std::int32_t>(tree.words.size());
        tree.words.push_back(word);
        std::int32_t at = 0;
        for (const auto& p : pron) {
            const LabelId label = inv.id_of(p);
            std::int32_t next = -1;
            for (auto c : tree.nodes[static_cast<std::size_t>(at)].children)
                if (tree.nodes[static_cast<std::size_t>(c)].label == label) {
                    next = c;
                    break;
                }
            if (next < 0) {
                next = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.push_back({label, at, {}, {}});
                tree.nodes[static_cast<std::size_t>(at)].children.push_back(next);
            }
            at = next;
        }
        tree.nodes[static_cast<std::size_t>(at)].word_ids.push_back(word_id);
        ++tree.word_end_count;
    }
    for (auto& n : tree.nodes)
        std::sort(n.children.begin(), n.children.end(), [&](std::int32_t a, std::int32_t b) {
            return tree.nodes[static_cast<std::size_t>(a)].label <
                   tree.nodes[static_cast<std::size_t>(b)].label;
        });
    return tree;
}

}  // namespace topokit
