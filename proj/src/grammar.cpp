#include "droid/grammar.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <memory>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "droid/errors.hpp"

namespace droid::analysis {

namespace {

using corpus::Language;

// ---------------------------------------------------------------------------
// Node vocabulary
// ---------------------------------------------------------------------------

const char* kNodeTypes[] = {
    "module",        "function_def", "class_def",    "definition",     "block",
    "if_stmt",       "else_clause",  "for_stmt",     "while_stmt",     "do_stmt",
    "switch_stmt",   "case_clause",  "try_stmt",     "catch_clause",   "finally_clause",
    "with_stmt",     "return_stmt",  "break_stmt",   "continue_stmt",  "import_stmt",
    "declaration",   "expr_statement", "preproc",    "call",           "arguments",
    "paren_expr",    "subscript",    "initializer_list", "identifier", "number_literal",
    "string_literal", "docstring",   "comment",      "operator",
};

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok { Ident, Keyword, ValueKeyword, Number, Str, Comment, DocComment, Punct,
                 Open, Close, Newline, Preproc };

struct Token {
    Tok kind;
    uint32_t begin = 0;
    uint32_t end = 0;   // [begin, end)
    char bracket = 0;   // for Open/Close: one of ( [ {
};

struct ParseFail {};

struct LangTraits {
    bool python = false;
    bool slash_comments = false;       // // and /* */
    bool hash_preproc = false;         // C/C++ preprocessor lines
    bool backtick_raw_string = false;  // Go
    bool backtick_template = false;    // JavaScript
    bool verbatim_string = false;      // C# @"..."
    bool newline_terminates = false;   // Go/JS automatic statement termination
    const std::unordered_set<std::string_view>* keywords = nullptr;
    const std::unordered_set<std::string_view>* value_keywords = nullptr;
    // leading keyword -> statement node type
    const std::unordered_map<std::string_view, const char*>* stmt_types = nullptr;
};

const std::unordered_set<std::string_view> kValueKeywordsC = {
    "true", "false", "nullptr", "this"};
const std::unordered_set<std::string_view> kValueKeywordsJava = {
    "true", "false", "null", "this", "super"};
const std::unordered_set<std::string_view> kValueKeywordsCs = {
    "true", "false", "null", "this", "base"};
const std::unordered_set<std::string_view> kValueKeywordsGo = {
    "true", "false", "nil", "iota"};
const std::unordered_set<std::string_view> kValueKeywordsJs = {
    "true", "false", "null", "undefined", "this", "super"};
const std::unordered_set<std::string_view> kValueKeywordsPy = {
    "True", "False", "None", "self"};

const std::unordered_set<std::string_view> kKeywordsCpp = {
    "alignas", "alignof", "and", "asm", "auto", "bool", "break", "case", "catch", "char",
    "class", "concept", "const", "consteval", "constexpr", "constinit", "continue",
    "decltype", "default", "delete", "do", "double", "dynamic_cast", "else", "enum",
    "explicit", "export", "extern", "float", "for", "friend", "goto", "if", "inline", "int",
    "long", "mutable", "namespace", "new", "noexcept", "not", "operator", "or", "override",
    "private", "protected", "public", "register", "reinterpret_cast", "requires", "return",
    "short", "signed", "sizeof", "static", "static_assert", "static_cast", "struct",
    "switch", "template", "thread_local", "throw", "try", "typedef", "typeid", "typename",
    "union", "unsigned", "using", "virtual", "void", "volatile", "wchar_t", "while", "xor"};

const std::unordered_set<std::string_view> kKeywordsJava = {
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
    "const", "continue", "default", "do", "double", "else", "enum", "extends", "final",
    "finally", "float", "for", "goto", "if", "implements", "import", "instanceof", "int",
    "interface", "long", "native", "new", "package", "private", "protected", "public",
    "record", "return", "short", "static", "strictfp", "switch", "synchronized", "throw",
    "throws", "transient", "try", "var", "void", "volatile", "while"};

const std::unordered_set<std::string_view> kKeywordsCs = {
    "abstract", "as", "async", "await", "bool", "break", "byte", "case", "catch", "char",
    "checked", "class", "const", "continue", "decimal", "default", "delegate", "do",
    "double", "else", "enum", "event", "explicit", "extern", "finally", "fixed", "float",
    "for", "foreach", "get", "goto", "if", "implicit", "in", "int", "interface", "internal",
    "is", "lock", "long", "namespace", "new", "object", "operator", "out", "override",
    "params", "private", "protected", "public", "readonly", "ref", "return", "sbyte",
    "sealed", "set", "short", "sizeof", "stackalloc", "static", "string", "struct",
    "switch", "throw", "try", "typeof", "uint", "ulong", "unchecked", "unsafe", "ushort",
    "using", "var", "virtual", "void", "volatile", "while"};

const std::unordered_set<std::string_view> kKeywordsGo = {
    "break", "case", "chan", "const", "continue", "default", "defer", "else",
    "fallthrough", "for", "func", "go", "goto", "if", "import", "interface", "map",
    "package", "range", "return", "select", "struct", "switch", "type", "var"};

const std::unordered_set<std::string_view> kKeywordsJs = {
    "async", "await", "break", "case", "catch", "class", "const", "continue", "debugger",
    "default", "delete", "do", "else", "export", "extends", "finally", "for", "function",
    "if", "import", "in", "instanceof", "let", "new", "of", "return", "static", "switch",
    "throw", "try", "typeof", "var", "void", "while", "with", "yield"};

const std::unordered_set<std::string_view> kKeywordsPy = {
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield"};

const std::unordered_map<std::string_view, const char*> kStmtTypesC = {
    {"if", "if_stmt"}, {"else", "else_clause"}, {"for", "for_stmt"}, {"foreach", "for_stmt"},
    {"while", "while_stmt"}, {"do", "do_stmt"}, {"switch", "switch_stmt"},
    {"select", "switch_stmt"}, {"case", "case_clause"}, {"default", "case_clause"},
    {"try", "try_stmt"}, {"catch", "catch_clause"}, {"finally", "finally_clause"},
    {"return", "return_stmt"}, {"break", "break_stmt"}, {"continue", "continue_stmt"},
    {"import", "import_stmt"}, {"package", "import_stmt"}, {"using", "import_stmt"},
    {"export", "import_stmt"},
    {"class", "class_def"}, {"struct", "class_def"}, {"interface", "class_def"},
    {"enum", "class_def"}, {"union", "class_def"}, {"record", "class_def"},
    {"func", "function_def"}, {"function", "function_def"}, {"async", "function_def"},
    {"namespace", "declaration"}, {"template", "declaration"}, {"typedef", "declaration"},
    {"var", "declaration"}, {"let", "declaration"}, {"const", "declaration"},
    {"type", "declaration"}, {"auto", "declaration"}, {"int", "declaration"},
    {"long", "declaration"}, {"short", "declaration"}, {"char", "declaration"},
    {"float", "declaration"}, {"double", "declaration"}, {"bool", "declaration"},
    {"boolean", "declaration"}, {"void", "declaration"}, {"unsigned", "declaration"},
    {"signed", "declaration"}, {"byte", "declaration"}, {"string", "declaration"},
    {"object", "declaration"}, {"decimal", "declaration"}, {"uint", "declaration"},
    {"static", "declaration"}, {"extern", "declaration"}, {"public", "declaration"},
    {"private", "declaration"}, {"protected", "declaration"}, {"internal", "declaration"},
    {"final", "declaration"}, {"abstract", "declaration"}, {"sealed", "declaration"},
    {"virtual", "declaration"}, {"override", "declaration"}, {"readonly", "declaration"},
    {"synchronized", "declaration"}, {"constexpr", "declaration"}, {"inline", "declaration"}};

const std::unordered_map<std::string_view, const char*> kStmtTypesPy = {
    {"if", "if_stmt"}, {"elif", "if_stmt"}, {"else", "else_clause"}, {"for", "for_stmt"},
    {"while", "while_stmt"}, {"try", "try_stmt"}, {"except", "catch_clause"},
    {"finally", "finally_clause"}, {"with", "with_stmt"}, {"def", "function_def"},
    {"async", "function_def"}, {"class", "class_def"}, {"return", "return_stmt"},
    {"break", "break_stmt"}, {"continue", "continue_stmt"}, {"import", "import_stmt"},
    {"from", "import_stmt"}, {"global", "declaration"}, {"nonlocal", "declaration"},
    {"pass", "expr_statement"}, {"raise", "expr_statement"}, {"assert", "expr_statement"},
    {"del", "expr_statement"}};

const LangTraits& traits_for(Language lang) {
    static const LangTraits c_cpp = {false, true, true, false, false, false, false,
                                     &kKeywordsCpp, &kValueKeywordsC, &kStmtTypesC};
    static const LangTraits csharp = {false, true, false, false, false, true, false,
                                      &kKeywordsCs, &kValueKeywordsCs, &kStmtTypesC};
    static const LangTraits go = {false, true, false, true, false, false, true,
                                  &kKeywordsGo, &kValueKeywordsGo, &kStmtTypesC};
    static const LangTraits java = {false, true, false, false, false, false, false,
                                    &kKeywordsJava, &kValueKeywordsJava, &kStmtTypesC};
    static const LangTraits js = {false, true, false, false, true, false, true,
                                  &kKeywordsJs, &kValueKeywordsJs, &kStmtTypesC};
    static const LangTraits py = {true, false, false, false, false, false, false,
                                  &kKeywordsPy, &kValueKeywordsPy, &kStmtTypesPy};
    switch (lang) {
        case Language::C_CPP: return c_cpp;
        case Language::CSHARP: return csharp;
        case Language::GO: return go;
        case Language::JAVA: return java;
        case Language::JAVASCRIPT: return js;
        case Language::PYTHON: return py;
    }
    return c_cpp;
}

bool is_ident_start(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' || c >= 0x80;
}
bool is_ident_cont(unsigned char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Multi-character operators, tried longest first.
const char* kOps3[] = {"===", "!==", "<<=", ">>=", "...", "<=>", "**=", "..=", ">>>"};
const char* kOps2[] = {"==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=",
                       "/=", "%=", "&=", "|=", "^=", "++", "--", "::", "->", "=>", ":=",
                       "<-", "??", "?.", "**", "//"};

class Lexer {
public:
    Lexer(std::string_view code, const LangTraits& traits, ParseMode mode)
        : code_(code), tr_(traits), mode_(mode) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        bool at_line_start = true;
        size_t i = 0;
        const size_t n = code_.size();
        while (i < n) {
            unsigned char c = code_[i];
            if (c == '\n') {
                out.push_back({Tok::Newline, (uint32_t)i, (uint32_t)i + 1, 0});
                at_line_start = true;
                ++i;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                ++i;
                continue;
            }
            if (tr_.python && c == '\\' && line_rest_blank(i + 1)) {
                i = skip_through_newline(i + 1);
                continue;  // explicit line join: no Newline token
            }
            size_t start = i;
            if (tr_.python && c == '#') {
                while (i < n && code_[i] != '\n') ++i;
                out.push_back({Tok::Comment, (uint32_t)start, (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (tr_.slash_comments && c == '/' && i + 1 < n && code_[i + 1] == '/') {
                bool doc = i + 2 < n && (code_[i + 2] == '/' || code_[i + 2] == '!');
                while (i < n && code_[i] != '\n') ++i;
                out.push_back({doc ? Tok::DocComment : Tok::Comment, (uint32_t)start,
                               (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (tr_.slash_comments && c == '/' && i + 1 < n && code_[i + 1] == '*') {
                bool doc = i + 3 < n && (code_[i + 2] == '*' || code_[i + 2] == '!') &&
                           code_[i + 3] != '/';
                i += 2;
                bool closed = false;
                while (i + 1 < n) {
                    if (code_[i] == '*' && code_[i + 1] == '/') {
                        i += 2;
                        closed = true;
                        break;
                    }
                    ++i;
                }
                if (!closed) {
                    if (mode_ == ParseMode::Strict) throw ParseFail{};
                    i = n;
                }
                out.push_back({doc ? Tok::DocComment : Tok::Comment, (uint32_t)start,
                               (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (tr_.hash_preproc && c == '#' && at_line_start) {
                // Preprocessor directive with backslash continuations.
                while (i < n) {
                    if (code_[i] == '\n') {
                        if (code_[i ? i - 1 : 0] == '\\') { ++i; continue; }
                        break;
                    }
                    ++i;
                }
                out.push_back({Tok::Preproc, (uint32_t)start, (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (is_string_start(i)) {
                lex_string(i, out);
                at_line_start = false;
                continue;
            }
            if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(code_[i + 1]))) {
                ++i;
                while (i < n && (is_ident_cont(code_[i]) || code_[i] == '.')) ++i;
                out.push_back({Tok::Number, (uint32_t)start, (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (is_ident_start(c)) {
                ++i;
                while (i < n && is_ident_cont(code_[i])) ++i;
                std::string_view text = code_.substr(start, i - start);
                // String prefixes such as r"...", f'...' in Python.
                if (tr_.python && text.size() <= 2 && i < n &&
                    (code_[i] == '"' || code_[i] == '\'') && prefix_letters(text)) {
                    lex_string(i, out, start);
                    at_line_start = false;
                    continue;
                }
                Tok kind = Tok::Ident;
                if (tr_.value_keywords->count(text)) kind = Tok::ValueKeyword;
                else if (tr_.keywords->count(text)) kind = Tok::Keyword;
                out.push_back({kind, (uint32_t)start, (uint32_t)i, 0});
                at_line_start = false;
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                out.push_back({Tok::Open, (uint32_t)i, (uint32_t)i + 1, (char)c});
                ++i;
                at_line_start = false;
                continue;
            }
            if (c == ')' || c == ']' || c == '}') {
                char open = c == ')' ? '(' : c == ']' ? '[' : '{';
                out.push_back({Tok::Close, (uint32_t)i, (uint32_t)i + 1, open});
                ++i;
                at_line_start = false;
                continue;
            }
            // Operator / punctuation with maximal munch.
            size_t len = munch_operator(i);
            out.push_back({Tok::Punct, (uint32_t)i, (uint32_t)(i + len), 0});
            i += len;
            at_line_start = false;
        }
        return out;
    }

    std::string_view text(const Token& t) const { return code_.substr(t.begin, t.end - t.begin); }

private:
    bool line_rest_blank(size_t i) const {
        while (i < code_.size() && (code_[i] == ' ' || code_[i] == '\t' || code_[i] == '\r')) ++i;
        return i < code_.size() && code_[i] == '\n';
    }
    size_t skip_through_newline(size_t i) const {
        while (i < code_.size() && code_[i] != '\n') ++i;
        return i < code_.size() ? i + 1 : i;
    }
    static bool prefix_letters(std::string_view s) {
        for (char c : s) {
            char l = (char)std::tolower((unsigned char)c);
            if (l != 'r' && l != 'b' && l != 'f' && l != 'u') return false;
        }
        return true;
    }

    bool is_string_start(size_t i) const {
        char c = code_[i];
        if (c == '"' || c == '\'') return true;
        if (c == '`' && (tr_.backtick_raw_string || tr_.backtick_template)) return true;
        if (c == '@' && tr_.verbatim_string && i + 1 < code_.size() && code_[i + 1] == '"')
            return true;
        return false;
    }

    void lex_string(size_t& i, std::vector<Token>& out, size_t token_start = SIZE_MAX) {
        const size_t n = code_.size();
        size_t start = token_start == SIZE_MAX ? i : token_start;
        char c = code_[i];

        if (c == '`') {  // Go raw string / JS template: multi-line
            bool escapes = tr_.backtick_template;
            ++i;
            while (i < n && code_[i] != '`') {
                if (escapes && code_[i] == '\\' && i + 1 < n) ++i;
                ++i;
            }
            if (i >= n) {
                if (mode_ == ParseMode::Strict) throw ParseFail{};
            } else {
                ++i;
            }
            out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
            return;
        }
        if (c == '@') {  // C# verbatim: "" escapes the quote, newlines allowed
            i += 2;
            while (i < n) {
                if (code_[i] == '"') {
                    if (i + 1 < n && code_[i + 1] == '"') { i += 2; continue; }
                    ++i;
                    out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
                    return;
                }
                ++i;
            }
            if (mode_ == ParseMode::Strict) throw ParseFail{};
            out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
            return;
        }

        char quote = c;
        bool triple = tr_.python && i + 2 < n && code_[i + 1] == quote && code_[i + 2] == quote;
        if (triple) {
            i += 3;
            while (i < n) {
                if (code_[i] == '\\' && i + 1 < n) { i += 2; continue; }
                if (code_[i] == quote && i + 2 < n && code_[i + 1] == quote &&
                    code_[i + 2] == quote) {
                    i += 3;
                    out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
                    return;
                }
                ++i;
            }
            if (mode_ == ParseMode::Strict) throw ParseFail{};
            out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
            return;
        }

        ++i;
        while (i < n) {
            if (code_[i] == '\\' && i + 1 < n) { i += 2; continue; }
            if (code_[i] == quote) {
                ++i;
                out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
                return;
            }
            if (code_[i] == '\n') break;  // single-line string hit end of line
            ++i;
        }
        if (mode_ == ParseMode::Strict) throw ParseFail{};
        out.push_back({Tok::Str, (uint32_t)start, (uint32_t)i, 0});
    }

    size_t munch_operator(size_t i) const {
        char c = code_[i];
        if (c == ';' || c == ',') return 1;
        auto match = [&](const char* op) {
            size_t len = std::strlen(op);
            return i + len <= code_.size() && code_.compare(i, len, op) == 0;
        };
        for (const char* op : kOps3)
            if (match(op)) return 3;
        for (const char* op : kOps2)
            if (match(op)) return 2;
        return 1;
    }

    std::string_view code_;
    const LangTraits& tr_;
    ParseMode mode_;
};

// ---------------------------------------------------------------------------
// Tree builder
// ---------------------------------------------------------------------------

struct PNode {
    const char* type;
    uint32_t begin = 0;
    uint32_t end = 0;
    std::vector<std::unique_ptr<PNode>> kids;

    PNode(const char* t, uint32_t b, uint32_t e) : type(t), begin(b), end(e) {}
    PNode* add(const char* t, uint32_t b, uint32_t e) {
        kids.push_back(std::make_unique<PNode>(t, b, e));
        return kids.back().get();
    }
};

AstNode to_ast(const PNode& p) {
    AstNode n;
    n.type = p.type;
    n.begin = p.begin;
    n.end = p.end;
    n.children.reserve(p.kids.size());
    for (const auto& k : p.kids) n.children.push_back(to_ast(*k));
    return n;
}

class BraceParser {
public:
    BraceParser(std::string_view code, const std::vector<Token>& toks, const Lexer& lx,
                const LangTraits& tr, ParseMode mode)
        : code_(code), toks_(toks), lx_(lx), tr_(tr), mode_(mode) {}

    std::unique_ptr<PNode> run() {
        auto root = std::make_unique<PNode>("module", 0, (uint32_t)code_.size());
        pos_ = 0;
        parse_statements(*root, /*in_block=*/false);
        if (pos_ < toks_.size()) throw ParseFail{};  // stray closer
        return root;
    }

private:
    // Accumulating statement state.
    struct Stmt {
        std::unique_ptr<PNode> node;
        const char* pending_type = nullptr;
        Tok last_kind = Tok::Newline;
        std::string_view last_text;
        bool has_block = false;
        bool any_tokens = false;
    };

    void parse_statements(PNode& parent, bool in_block) {
        Stmt st;
        auto open_stmt = [&](uint32_t at) {
            if (!st.node) st.node = std::make_unique<PNode>("expr_statement", at, at);
        };
        auto finalize = [&]() {
            if (!st.node) return;
            if (st.any_tokens || !st.node->kids.empty()) {
                st.node->type = st.pending_type          ? st.pending_type
                                : st.has_block           ? "definition"
                                                         : "expr_statement";
                parent.kids.push_back(std::move(st.node));
            }
            st = Stmt{};
        };

        while (pos_ < toks_.size()) {
            const Token& t = toks_[pos_];
            switch (t.kind) {
                case Tok::Newline:
                    if (tr_.newline_terminates && st.node && terminable(st)) finalize();
                    ++pos_;
                    break;
                case Tok::Comment:
                    parent.add("comment", t.begin, t.end);
                    ++pos_;
                    break;
                case Tok::DocComment:
                    parent.add("docstring", t.begin, t.end);
                    ++pos_;
                    break;
                case Tok::Preproc:
                    finalize();
                    parent.add("preproc", t.begin, t.end);
                    ++pos_;
                    break;
                case Tok::Close:
                    if (!in_block || t.bracket != '{') throw ParseFail{};
                    finalize();
                    ++pos_;  // consume '}'
                    return;
                case Tok::Open:
                    if (t.bracket == '{') {
                        bool initializer = st.node && expression_context(st);
                        if (initializer) {
                            open_stmt(t.begin);
                            parse_group(*st.node, "initializer_list");
                            st.last_kind = Tok::Close;
                            st.last_text = {};
                            st.any_tokens = true;
                        } else {
                            open_stmt(t.begin);
                            ++pos_;  // consume '{'
                            PNode* block = st.node->add("block", t.begin, t.end);
                            parse_statements(*block, /*in_block=*/true);
                            block->end = pos_ > 0 ? toks_[pos_ - 1].end : t.end;
                            st.has_block = true;
                            st.any_tokens = true;
                            finalize();
                        }
                    } else {
                        open_stmt(t.begin);
                        attach_group(*st.node, st);
                    }
                    break;
                case Tok::Ident:
                case Tok::ValueKeyword:
                case Tok::Number:
                case Tok::Str:
                case Tok::Punct:
                case Tok::Keyword:
                    open_stmt(t.begin);
                    if (t.kind == Tok::Keyword) {
                        if (!st.pending_type) {
                            auto it = tr_.stmt_types->find(lx_.text(t));
                            if (it != tr_.stmt_types->end()) st.pending_type = it->second;
                        }
                    } else if (t.kind == Tok::Punct && lx_.text(t) == ";") {
                        st.any_tokens = true;
                        finalize();
                        ++pos_;
                        continue;
                    } else {
                        add_leaf(*st.node, t);
                    }
                    st.any_tokens = true;
                    st.last_kind = t.kind;
                    st.last_text = lx_.text(t);
                    st.node->end = t.end;
                    ++pos_;
                    break;
            }
        }
        if (in_block && mode_ == ParseMode::Strict) throw ParseFail{};
        finalize();
    }

    // True when '{' after the current statement reads as an expression,
    // such as after '=', ',', 'return' or a binary operator.
    bool expression_context(const Stmt& st) const {
        if (st.last_kind == Tok::Punct) return true;
        if (st.last_kind == Tok::Keyword)
            return st.last_text == "return" || st.last_text == "in" || st.last_text == "of";
        return false;
    }

    bool terminable(const Stmt& st) const {
        switch (st.last_kind) {
            case Tok::Ident:
            case Tok::ValueKeyword:
            case Tok::Number:
            case Tok::Str:
            case Tok::Close:
                return true;
            case Tok::Keyword:
                return st.last_text == "return" || st.last_text == "break" ||
                       st.last_text == "continue" || st.last_text == "fallthrough";
            default:
                return false;
        }
    }

    void add_leaf(PNode& into, const Token& t) {
        switch (t.kind) {
            case Tok::Ident: into.add("identifier", t.begin, t.end); break;
            case Tok::ValueKeyword: break;  // no leaf; counted as operand in token classes
            case Tok::Number: into.add("number_literal", t.begin, t.end); break;
            case Tok::Str: into.add("string_literal", t.begin, t.end); break;
            case Tok::Punct: into.add("operator", t.begin, t.end); break;
            default: break;
        }
    }

    // Parses a bracketed group starting at pos_ (an Open token) into `into`.
    // A '(' directly after an identifier leaf turns that identifier into a
    // call node with the group as its arguments.
    void attach_group(PNode& into, Stmt& st) {
        const Token& open = toks_[pos_];
        if (open.bracket == '(' && !into.kids.empty() &&
            std::string_view(into.kids.back()->type) == "identifier") {
            auto callee = std::move(into.kids.back());
            into.kids.pop_back();
            PNode* call = into.add("call", callee->begin, open.end);
            call->kids.push_back(std::move(callee));
            parse_group(*call, "arguments");
            call->end = call->kids.back()->end;
        } else {
            parse_group(into, open.bracket == '(' ? "paren_expr" : "subscript");
        }
        st.last_kind = Tok::Close;
        st.last_text = {};
        st.any_tokens = true;
    }

    void parse_group(PNode& into, const char* type) {
        const Token& open = toks_[pos_];
        PNode* group = into.add(type, open.begin, open.end);
        ++pos_;
        while (pos_ < toks_.size()) {
            const Token& t = toks_[pos_];
            switch (t.kind) {
                case Tok::Close:
                    if (t.bracket != open.bracket) throw ParseFail{};
                    group->end = t.end;
                    ++pos_;
                    return;
                case Tok::Open:
                    if (t.bracket == '{') {
                        parse_group(*group, "initializer_list");
                    } else if (t.bracket == '(' && !group->kids.empty() &&
                               std::string_view(group->kids.back()->type) == "identifier") {
                        auto callee = std::move(group->kids.back());
                        group->kids.pop_back();
                        PNode* call = group->add("call", callee->begin, t.end);
                        call->kids.push_back(std::move(callee));
                        parse_group(*call, "arguments");
                        call->end = call->kids.back()->end;
                    } else {
                        parse_group(*group, t.bracket == '(' ? "paren_expr" : "subscript");
                    }
                    break;
                case Tok::Comment:
                    group->add("comment", t.begin, t.end);
                    ++pos_;
                    break;
                case Tok::DocComment:
                    group->add("docstring", t.begin, t.end);
                    ++pos_;
                    break;
                case Tok::Newline:
                case Tok::Preproc:
                    ++pos_;
                    break;
                default:
                    add_leaf(*group, t);
                    ++pos_;
                    break;
            }
        }
        if (mode_ == ParseMode::Strict) throw ParseFail{};  // unbalanced at end of input
        group->end = (uint32_t)code_.size();
    }

    std::string_view code_;
    const std::vector<Token>& toks_;
    const Lexer& lx_;
    const LangTraits& tr_;
    ParseMode mode_;
    size_t pos_ = 0;
};

class PythonParser {
public:
    PythonParser(std::string_view code, const std::vector<Token>& toks, const Lexer& lx,
                 const LangTraits& tr, ParseMode mode)
        : code_(code), toks_(toks), lx_(lx), tr_(tr), mode_(mode) {}

    std::unique_ptr<PNode> run() {
        auto root = std::make_unique<PNode>("module", 0, (uint32_t)code_.size());
        build_lines();
        // Indent stack; the module is the indent-0 block.
        std::vector<Level> stack{{0, root.get(), "module"}};
        PNode* pending_block = nullptr;
        const char* pending_owner = nullptr;
        int pending_indent = -1;

        for (const auto& line : lines_) {
            if (line.comment_only) {
                stack.back().block->add("comment", toks_[line.first].begin,
                                        toks_[line.first].end);
                continue;
            }
            if (pending_block) {
                if (line.indent <= pending_indent) {
                    if (mode_ == ParseMode::Strict) throw ParseFail{};  // missing suite
                    pending_block = nullptr;
                    adjust_dedent(stack, line.indent);
                } else {
                    stack.push_back({line.indent, pending_block, pending_owner});
                    pending_block = nullptr;
                }
            } else {
                if (line.indent > stack.back().indent) throw ParseFail{};  // unexpected indent
                adjust_dedent(stack, line.indent);
            }
            const Level& top = stack.back();
            parse_logical_line(line, *top.block, top.owner, pending_block, pending_owner);
            if (pending_block) pending_indent = line.indent;
        }
        if (pending_block && mode_ == ParseMode::Strict) throw ParseFail{};
        return root;
    }

private:
    struct Line {
        size_t first = 0, last = 0;  // token index range [first, last)
        int indent = 0;
        bool comment_only = false;
    };

    struct Level {
        int indent;
        PNode* block;
        const char* owner;  // node type of the construct owning this block
    };

    void adjust_dedent(std::vector<Level>& stack, int indent) {
        while (indent < stack.back().indent) stack.pop_back();
        if (indent != stack.back().indent) throw ParseFail{};  // dedent to unknown level
    }

    int indent_of(uint32_t byte) const {
        // Width of leading whitespace on the physical line containing `byte`,
        // tabs advancing to the next multiple of 8.
        size_t line_start = byte;
        while (line_start > 0 && code_[line_start - 1] != '\n') --line_start;
        int col = 0;
        for (size_t i = line_start; i < byte; ++i) {
            if (code_[i] == '\t')
                col = (col / 8 + 1) * 8;
            else
                ++col;
        }
        return col;
    }

    void build_lines() {
        int depth = 0;
        Line cur;
        bool open = false;
        bool any_code = false;
        size_t comment_first = SIZE_MAX;
        auto flush = [&](size_t end) {
            if (open && any_code) {
                cur.last = end;
                lines_.push_back(cur);
            } else if (!any_code && comment_first != SIZE_MAX) {
                Line c;
                c.first = comment_first;
                c.last = comment_first + 1;
                c.comment_only = true;
                lines_.push_back(c);
            }
            open = false;
            any_code = false;
            comment_first = SIZE_MAX;
        };
        for (size_t i = 0; i < toks_.size(); ++i) {
            const Token& t = toks_[i];
            if (t.kind == Tok::Newline) {
                if (depth == 0) flush(i);
                continue;
            }
            if (t.kind == Tok::Comment) {
                if (!any_code && comment_first == SIZE_MAX) comment_first = i;
                continue;
            }
            if (t.kind == Tok::Open) ++depth;
            if (t.kind == Tok::Close) {
                --depth;
                if (depth < 0) throw ParseFail{};
            }
            if (!open) {
                cur = Line{};
                cur.first = i;
                cur.indent = indent_of(t.begin);
                open = true;
            }
            any_code = true;
        }
        if (depth != 0 && mode_ == ParseMode::Strict) throw ParseFail{};
        flush(toks_.size());
    }

    // Emits the statements of one logical line into `block`. When the line is
    // a suite header, `pending_block` receives the new suite awaiting its
    // indented body (unless an inline body followed the colon).
    void parse_logical_line(const Line& line, PNode& block, const char* block_owner,
                            PNode*& pending_block, const char*& pending_owner) {
        pending_block = nullptr;
        pending_owner = nullptr;
        size_t i = line.first;
        while (i < line.last) {
            // One simple statement: up to top-level ';' or end of line.
            size_t begin = i;
            int depth = 0;
            size_t colon = SIZE_MAX;
            size_t end = line.last;
            size_t last_code = begin;
            for (size_t j = begin; j < line.last; ++j) {
                const Token& t = toks_[j];
                if (t.kind == Tok::Newline || t.kind == Tok::Comment) continue;
                if (t.kind == Tok::Open) ++depth;
                if (t.kind == Tok::Close) --depth;
                if (depth == 0 && t.kind == Tok::Punct && lx_.text(t) == ";") {
                    end = j;
                    break;
                }
                if (depth == 0 && t.kind == Tok::Punct && lx_.text(t) == ":" &&
                    colon == SIZE_MAX)
                    colon = j;
                last_code = j;
            }

            const char* stype = nullptr;
            std::string_view lead;
            const Token& first = toks_[begin];
            if (first.kind == Tok::Keyword) {
                auto it = tr_.stmt_types->find(lx_.text(first));
                if (it != tr_.stmt_types->end()) stype = it->second;
                lead = lx_.text(first);
            } else if (first.kind == Tok::Ident) {
                lead = lx_.text(first);
            }

            bool header = false;
            if (colon != SIZE_MAX) {
                bool kw_header = stype && is_suite_type(stype);
                bool colon_last = colon == last_code;
                if (kw_header || colon_last) {
                    header = true;
                    if (!stype) {
                        if (lead == "match") stype = "switch_stmt";
                        else if (lead == "case") stype = "case_clause";
                        else stype = "definition";
                    }
                }
            }

            // Bare string as first statement of a module/def/class body.
            bool doc_owner = std::string_view(block_owner) == "module" ||
                             std::string_view(block_owner) == "function_def" ||
                             std::string_view(block_owner) == "class_def";
            if (!header && doc_owner && block.kids.empty() && first.kind == Tok::Str &&
                single_token(begin, end)) {
                block.add("docstring", first.begin, first.end);
            } else {
                PNode* stmt = block.add(stype ? stype : "expr_statement", first.begin,
                                        toks_[end > begin ? end - 1 : begin].end);
                size_t body_end = header ? colon : end;
                emit_tokens(begin, body_end, *stmt);
                if (header) {
                    PNode* suite = stmt->add("block", toks_[colon].end, toks_[colon].end);
                    if (has_code(colon + 1, end)) {
                        emit_inline_suite(colon + 1, end, *suite);
                    } else {
                        pending_block = suite;
                        pending_owner = stmt->type;
                    }
                }
            }
            i = end < line.last ? end + 1 : line.last;  // skip the ';'
        }
    }

    bool single_token(size_t begin, size_t end) const {
        size_t count = 0;
        for (size_t j = begin; j < end; ++j) {
            if (toks_[j].kind == Tok::Newline || toks_[j].kind == Tok::Comment) continue;
            ++count;
        }
        return count == 1;
    }

    bool has_code(size_t begin, size_t end) const {
        for (size_t j = begin; j < end; ++j)
            if (toks_[j].kind != Tok::Newline && toks_[j].kind != Tok::Comment) return true;
        return false;
    }

    static bool is_suite_type(std::string_view t) {
        return t == "if_stmt" || t == "else_clause" || t == "for_stmt" || t == "while_stmt" ||
               t == "try_stmt" || t == "catch_clause" || t == "finally_clause" ||
               t == "with_stmt" || t == "function_def" || t == "class_def";
    }

    void emit_inline_suite(size_t begin, size_t end, PNode& suite) {
        size_t i = begin;
        while (i < end) {
            size_t stmt_end = end;
            int depth = 0;
            for (size_t j = i; j < end; ++j) {
                const Token& t = toks_[j];
                if (t.kind == Tok::Open) ++depth;
                if (t.kind == Tok::Close) --depth;
                if (depth == 0 && t.kind == Tok::Punct && lx_.text(t) == ";") {
                    stmt_end = j;
                    break;
                }
            }
            if (has_code(i, stmt_end)) {
                const Token& first = toks_[i];
                const char* stype = nullptr;
                if (first.kind == Tok::Keyword) {
                    auto it = tr_.stmt_types->find(lx_.text(first));
                    if (it != tr_.stmt_types->end()) stype = it->second;
                }
                PNode* stmt = suite.add(stype ? stype : "expr_statement", first.begin,
                                        toks_[stmt_end - 1].end);
                emit_tokens(i, stmt_end, *stmt);
            }
            i = stmt_end + 1;
        }
    }

    // Emits leaves and nested groups for tokens [begin, end).
    void emit_tokens(size_t begin, size_t end, PNode& into) {
        size_t i = begin;
        while (i < end) {
            const Token& t = toks_[i];
            switch (t.kind) {
                case Tok::Open: {
                    if (t.bracket == '(' && !into.kids.empty() &&
                        std::string_view(into.kids.back()->type) == "identifier") {
                        auto callee = std::move(into.kids.back());
                        into.kids.pop_back();
                        PNode* call = into.add("call", callee->begin, t.end);
                        call->kids.push_back(std::move(callee));
                        i = emit_group(i, end, *call, "arguments");
                        call->end = call->kids.back()->end;
                    } else {
                        const char* gt = t.bracket == '(' ? "paren_expr"
                                        : t.bracket == '[' ? "subscript"
                                                           : "initializer_list";
                        i = emit_group(i, end, into, gt);
                    }
                    break;
                }
                case Tok::Ident:
                    into.add("identifier", t.begin, t.end);
                    ++i;
                    break;
                case Tok::Number:
                    into.add("number_literal", t.begin, t.end);
                    ++i;
                    break;
                case Tok::Str:
                    into.add("string_literal", t.begin, t.end);
                    ++i;
                    break;
                case Tok::Punct:
                    into.add("operator", t.begin, t.end);
                    ++i;
                    break;
                case Tok::Comment:
                    into.add("comment", t.begin, t.end);
                    ++i;
                    break;
                default:
                    ++i;
                    break;
            }
        }
    }

    // Parses the group opened at token `open_idx`; returns the index after
    // its Close (or `end` if the group runs to the slice boundary).
    size_t emit_group(size_t open_idx, size_t end, PNode& into, const char* type) {
        const Token& open = toks_[open_idx];
        PNode* group = into.add(type, open.begin, open.end);
        size_t i = open_idx + 1;
        while (i < end) {
            const Token& t = toks_[i];
            if (t.kind == Tok::Close) {
                if (t.bracket != open.bracket) throw ParseFail{};
                group->end = t.end;
                return i + 1;
            }
            if (t.kind == Tok::Open) {
                if (t.bracket == '(' && !group->kids.empty() &&
                    std::string_view(group->kids.back()->type) == "identifier") {
                    auto callee = std::move(group->kids.back());
                    group->kids.pop_back();
                    PNode* call = group->add("call", callee->begin, t.end);
                    call->kids.push_back(std::move(callee));
                    i = emit_group(i, end, *call, "arguments");
                    call->end = call->kids.back()->end;
                } else {
                    const char* gt = t.bracket == '(' ? "paren_expr"
                                    : t.bracket == '[' ? "subscript"
                                                       : "initializer_list";
                    i = emit_group(i, end, *group, gt);
                }
                continue;
            }
            switch (t.kind) {
                case Tok::Ident: group->add("identifier", t.begin, t.end); break;
                case Tok::Number: group->add("number_literal", t.begin, t.end); break;
                case Tok::Str: group->add("string_literal", t.begin, t.end); break;
                case Tok::Punct: group->add("operator", t.begin, t.end); break;
                case Tok::Comment: group->add("comment", t.begin, t.end); break;
                default: break;
            }
            ++i;
        }
        if (mode_ == ParseMode::Strict) throw ParseFail{};
        return end;
    }

    std::string_view code_;
    const std::vector<Token>& toks_;
    const Lexer& lx_;
    const LangTraits& tr_;
    ParseMode mode_;
    std::vector<Line> lines_;
};

} // namespace

const std::vector<std::string>& canonical_node_types() {
    static const std::vector<std::string> types(std::begin(kNodeTypes), std::end(kNodeTypes));
    return types;
}

bool ReferenceGrammar::supports(corpus::Language) const { return true; }

std::optional<AstNode> ReferenceGrammar::parse(std::string_view code, corpus::Language lang,
                                               ParseMode mode) {
    const LangTraits& tr = traits_for(lang);
    try {
        Lexer lexer(code, tr, mode);
        std::vector<Token> toks = lexer.run();
        std::unique_ptr<PNode> root;
        if (tr.python) {
            PythonParser p(code, toks, lexer, tr, mode);
            root = p.run();
        } else {
            BraceParser p(code, toks, lexer, tr, mode);
            root = p.run();
        }
        return to_ast(*root);
    } catch (const ParseFail&) {
        return std::nullopt;
    }
}

const NodeCategories& ReferenceGrammar::categories(corpus::Language) const {
    static const NodeCategories cat = {
        /*identifier_types=*/{"identifier"},
        /*comment_types=*/{"comment", "docstring"},
        /*docstring_types=*/{"docstring"},
        /*branch_types=*/{"if_stmt", "for_stmt", "while_stmt", "do_stmt", "case_clause",
                          "catch_clause"},
    };
    return cat;
}

TokenClassCounts ReferenceGrammar::token_classes(std::string_view code, corpus::Language lang) {
    const LangTraits& tr = traits_for(lang);
    TokenClassCounts out;
    std::vector<Token> toks;
    try {
        Lexer lexer(code, tr, ParseMode::Lenient);
        toks = lexer.run();
        std::unordered_set<std::string_view> ops, operands;
        for (const Token& t : toks) {
            std::string_view text = code.substr(t.begin, t.end - t.begin);
            switch (t.kind) {
                case Tok::Punct:
                case Tok::Keyword:
                case Tok::Open:
                case Tok::Close:
                    out.operator_total++;
                    ops.insert(text);
                    break;
                case Tok::Preproc:
                    out.operator_total++;
                    ops.insert(text.substr(0, text.find_first_of(" \t<\"")));
                    break;
                case Tok::Ident:
                case Tok::ValueKeyword:
                case Tok::Number:
                case Tok::Str:
                    out.operand_total++;
                    operands.insert(text);
                    break;
                default:
                    break;
            }
        }
        out.operator_distinct = ops.size();
        out.operand_distinct = operands.size();
    } catch (const ParseFail&) {
        // Lenient lexing does not fail; keep zero counts if it somehow does.
    }
    return out;
}

} // namespace droid::analysis
