#pragma once

#include <string_view>
#include <vector>

#include "droid/analysis.hpp"

namespace droid::analysis {

// Names of the node types the reference grammar can emit, in canonical
// order. The feature registry's node-density table binds to this list.
const std::vector<std::string>& canonical_node_types();

// Built-in structural grammar for the six supported languages. It is not a
// full language grammar: it resolves comments, strings, brackets, statement
// boundaries and keyword-led constructs into a tree over the canonical node
// vocabulary, which is what the downstream stylometry consumes. Brace
// languages nest on bracket structure; Python nests on indentation.
//
// Parse failures (strict mode): unbalanced or mismatched brackets,
// unterminated strings or block comments, and inconsistent indentation.
// Lenient mode closes constructs left open at end of input, which keeps
// token-truncated code summarizable.
class ReferenceGrammar final : public GrammarProvider {
public:
    bool supports(corpus::Language lang) const override;
    std::optional<AstNode> parse(std::string_view code, corpus::Language lang,
                                 ParseMode mode = ParseMode::Strict) override;
    const NodeCategories& categories(corpus::Language lang) const override;
    TokenClassCounts token_classes(std::string_view code, corpus::Language lang) override;
};

} // namespace droid::analysis
