// Recursive-descent parser for the Slang subset: unary/binary/keyword sends,
// assignment, return, temporaries, blocks, pragmas and VM calls.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"

namespace cascade {

namespace {

enum class Tok {
    Identifier,
    Keyword,  // identifier immediately followed by ':'
    Binary,
    Integer,
    Character,
    Symbol,
    Assign,
    Caret,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Bar,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    Word value = 0;
    SourcePos pos;
};

bool is_binary_char(char c) {
    switch (c) {
        case '+': case '-': case '*': case '/': case '\\': case '<': case '>':
        case '=': case '~': case '&': case '@': case '%': case ',': case '?':
        case '|':
            return true;
        default:
            return false;
    }
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t = next(out.empty() ? nullptr : &out.back());
            out.push_back(std::move(t));
            if (out.back().kind == Tok::End) break;
        }
        return out;
    }

private:
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, col_, msg); }

    void skip_space() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(peek()))) advance();
            if (peek() == '"') {
                advance();
                while (pos_ < text_.size() && peek() != '"') advance();
                if (pos_ >= text_.size()) fail("unterminated comment");
                advance();
                continue;
            }
            return;
        }
    }

    static bool ends_operand(const Token* prev) {
        if (prev == nullptr) return false;
        switch (prev->kind) {
            case Tok::Identifier: case Tok::Integer: case Tok::Character: case Tok::Symbol:
            case Tok::RParen: case Tok::RBracket: case Tok::RBrace:
                return true;
            default:
                return false;
        }
    }

    Word lex_number(bool negative) {
        std::size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        std::string_view digits = text_.substr(start, pos_ - start);
        int radix = 10;
        if (peek() == 'r') {
            int r = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), r);
            if (ec != std::errc{} || r < 2 || r > 36) fail("bad radix");
            radix = r;
            advance();
            start = pos_;
            while (std::isalnum(static_cast<unsigned char>(peek()))) advance();
            digits = text_.substr(start, pos_ - start);
            if (digits.empty()) fail("missing digits after radix");
        }
        unsigned long long magnitude = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), magnitude, radix);
        if (ec != std::errc{} || p != digits.data() + digits.size()) fail("malformed integer literal");
        constexpr unsigned long long kMaxMagnitude = static_cast<unsigned long long>(Oop::kMaxSmallInt);
        if (negative ? magnitude > kMaxMagnitude + 1 : magnitude > kMaxMagnitude)
            fail("integer literal does not fit a tagged word");
        return negative ? static_cast<Word>(0) - magnitude : magnitude;
    }

    Token next(const Token* prev) {
        Token t;
        t.pos = {line_, col_};
        if (pos_ >= text_.size()) {
            t.kind = Tok::End;
            return t;
        }
        char c = peek();
        if (is_ident_start(c)) {
            std::size_t start = pos_;
            while (is_ident_char(peek())) advance();
            t.text = std::string(text_.substr(start, pos_ - start));
            if (peek() == ':' && peek(1) != '=') {
                advance();
                t.text += ':';
                t.kind = Tok::Keyword;
            } else {
                t.kind = Tok::Identifier;
            }
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            t.kind = Tok::Integer;
            t.value = lex_number(false);
            return t;
        }
        if (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))) && !ends_operand(prev)) {
            advance();
            t.kind = Tok::Integer;
            t.value = lex_number(true);
            return t;
        }
        if (c == '$') {
            advance();
            if (pos_ >= text_.size()) fail("missing character after $");
            t.kind = Tok::Character;
            t.value = static_cast<unsigned char>(peek());
            advance();
            return t;
        }
        if (c == '#') {
            advance();
            std::size_t start = pos_;
            if (is_ident_start(peek())) {
                while (is_ident_char(peek()) || peek() == ':') advance();
            } else if (is_binary_char(peek())) {
                while (is_binary_char(peek())) advance();
            } else {
                fail("malformed symbol literal");
            }
            t.kind = Tok::Symbol;
            t.text = std::string(text_.substr(start, pos_ - start));
            t.value = symbol_id(t.text);
            return t;
        }
        if (c == '\'') fail("string literals are not part of the language");
        if (c == ':' && peek(1) == '=') {
            advance();
            advance();
            t.kind = Tok::Assign;
            return t;
        }
        auto single = [&](Tok kind) {
            advance();
            t.kind = kind;
            t.text = std::string(1, c);
            return t;
        };
        switch (c) {
            case '^': return single(Tok::Caret);
            case '.': return single(Tok::Dot);
            case '(': return single(Tok::LParen);
            case ')': return single(Tok::RParen);
            case '[': return single(Tok::LBracket);
            case ']': return single(Tok::RBracket);
            case '{': return single(Tok::LBrace);
            case '}': return single(Tok::RBrace);
            case ':': return single(Tok::Colon);
            default: break;
        }
        if (c == '|' && peek(1) != '|') return single(Tok::Bar);
        if (is_binary_char(c)) {
            std::size_t start = pos_;
            advance();
            // A trailing '-' before a digit starts a negative literal.
            while (is_binary_char(peek()) && !(peek() == '-' && std::isdigit(static_cast<unsigned char>(peek(1)))))
                advance();
            t.kind = Tok::Binary;
            t.text = std::string(text_.substr(start, pos_ - start));
            return t;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::string class_name)
        : toks_(std::move(tokens)), class_name_(std::move(class_name)) {}

    MethodNode parse_method() {
        MethodNode m;
        m.class_name = class_name_;
        parse_pattern(m);
        bool saw_temps = false;
        for (;;) {
            if (at_binary("<")) {
                m.pragmas.push_back(parse_pragma());
            } else if (at(Tok::Bar) || at_binary("||")) {
                if (saw_temps) fail(cur(), "duplicate temporaries declaration");
                saw_temps = true;
                m.temps = parse_temps();
            } else {
                break;
            }
        }
        std::set<std::string, std::less<>> names(m.params.begin(), m.params.end());
        for (const auto& t : m.temps) {
            if (!names.insert(t).second) fail(cur(), "duplicate variable '" + t + "'");
        }
        scopes_.push_back(names);
        m.body = parse_statements(Tok::End);
        scopes_.pop_back();
        expect(Tok::End, "end of method");
        return m;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    const Token& look(std::size_t ahead) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    bool at(Tok k) const { return cur().kind == k; }
    bool at_binary(std::string_view op) const { return cur().kind == Tok::Binary && cur().text == op; }
    Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] static void fail(const Token& at, const std::string& msg) {
        throw ParseError(at.pos.line, at.pos.column, msg);
    }

    Token expect(Tok k, const char* what) {
        if (!at(k)) fail(cur(), std::string("expected ") + what);
        return take();
    }

    void parse_pattern(MethodNode& m) {
        if (at(Tok::Identifier)) {
            m.selector = take().text;
        } else if (at(Tok::Binary) || at(Tok::Bar)) {
            m.selector = take().text;
            m.params.push_back(expect(Tok::Identifier, "argument name").text);
        } else if (at(Tok::Keyword)) {
            while (at(Tok::Keyword)) {
                m.selector += take().text;
                m.params.push_back(expect(Tok::Identifier, "argument name").text);
            }
        } else {
            fail(cur(), "expected message pattern");
        }
        std::set<std::string, std::less<>> seen;
        for (const auto& p : m.params) {
            if (p == "self") fail(cur(), "'self' cannot be a parameter");
            if (!seen.insert(p).second) fail(cur(), "duplicate parameter '" + p + "'");
        }
    }

    std::vector<std::string> parse_temps() {
        std::vector<std::string> temps;
        if (at_binary("||")) {
            take();
            return temps;
        }
        expect(Tok::Bar, "'|'");
        while (at(Tok::Identifier)) temps.push_back(take().text);
        expect(Tok::Bar, "'|' closing temporaries");
        return temps;
    }

    BasicType parse_type_symbol() {
        Token sym = expect(Tok::Symbol, "type symbol");
        auto type = basic_type_from_name(sym.text);
        if (!type) fail(sym, "unknown type #" + sym.text);
        return *type;
    }

    PragmaNode parse_pragma() {
        Token open = take();  // '<'
        PragmaNode p;
        p.pos = open.pos;
        if (at(Tok::Identifier) && cur().text == "primitive") {
            take();
            p.kind = PragmaNode::Kind::Primitive;
        } else if (at(Tok::Keyword) && cur().text == "var:") {
            take();
            p.kind = PragmaNode::Kind::TypeAnnotation;
            p.var_name = expect(Tok::Symbol, "variable symbol").text;
            if (!at(Tok::Keyword) || cur().text != "type:") fail(cur(), "expected 'type:'");
            take();
            p.type = parse_type_symbol();
            if (at(Tok::Keyword) && cur().text == "ref:") {
                take();
                Token flag = expect(Tok::Identifier, "true or false");
                if (flag.text != "true" && flag.text != "false") fail(flag, "expected true or false");
                p.by_reference = flag.text == "true";
            }
        } else if (at(Tok::Keyword) && cur().text == "returns:") {
            take();
            p.kind = PragmaNode::Kind::ReturnType;
            p.type = parse_type_symbol();
        } else {
            fail(cur(), "unknown pragma");
        }
        if (!at_binary(">")) fail(cur(), "expected '>' closing pragma");
        take();
        return p;
    }

    bool declared(std::string_view name) const {
        for (const auto& s : scopes_)
            if (s.count(name)) return true;
        return false;
    }

    std::vector<Statement> parse_statements(Tok closer) {
        std::vector<Statement> out;
        bool returned = false;
        while (!at(closer)) {
            if (at(Tok::Dot)) {
                take();
                continue;
            }
            if (at_binary("<")) {
                if (closer == Tok::End) throw PragmaPlacementError(cur().pos.line, cur().pos.column);
                fail(cur(), "pragma inside a block");
            }
            if (returned) fail(cur(), "statement after return");
            Statement s = parse_statement();
            returned = s.as<ReturnStmt>() != nullptr;
            out.push_back(std::move(s));
            if (!at(Tok::Dot) && !at(closer)) fail(cur(), "expected '.' between statements");
        }
        return out;
    }

    Statement parse_statement() {
        Statement s;
        s.pos = cur().pos;
        if (at(Tok::Caret)) {
            take();
            s.node = ReturnStmt{parse_expr()};
        } else if (at(Tok::Identifier) && look(1).kind == Tok::Assign) {
            Token target = take();
            take();
            if (target.text == "self" || target.text == "true" || target.text == "false" || target.text == "nil")
                fail(target, "cannot assign to '" + target.text + "'");
            s.node = AssignStmt{target.text, parse_expr()};
        } else {
            s.node = ExprStmt{parse_expr()};
        }
        return s;
    }

    Expr parse_expr() {
        if (at(Tok::Identifier) && look(1).kind == Tok::Assign)
            fail(look(1), "assignment is only allowed as a statement");
        return parse_keyword();
    }

    Expr parse_keyword() {
        Expr receiver = parse_binary();
        if (!at(Tok::Keyword)) return receiver;
        SourcePos pos = cur().pos;
        std::string selector;
        std::vector<Expr> args;
        std::vector<bool> braced;
        while (at(Tok::Keyword)) {
            std::string part = take().text;
            selector += part;
            if (at(Tok::LBrace)) {
                if (part != "withArguments:") fail(cur(), "brace arrays are only allowed as VM call arguments");
                args.push_back(parse_brace());
                braced.push_back(true);
            } else {
                args.push_back(parse_binary());
                braced.push_back(false);
            }
        }
        if (selector == "callVMFunction:withArguments:") {
            const auto* self_ref = receiver.as<VarRefExpr>();
            if (self_ref == nullptr || self_ref->name != "self") fail(toks_[pos_ - 1], "VM calls must be sent to self");
            const auto* fn = args[0].as<LiteralExpr>();
            if (fn == nullptr || fn->kind != LiteralExpr::Kind::Symbol)
                fail(toks_[pos_ - 1], "VM call needs a symbol naming the function");
            if (!braced[1]) fail(toks_[pos_ - 1], "VM call arguments must be a brace array");
            VmCallExpr call{fn->text, brace_items(args[1])};
            return Expr{std::move(call), pos};
        }
        for (bool b : braced)
            if (b) fail(cur(), "brace arrays are only allowed as VM call arguments");
        return Expr{SendExpr{std::move(receiver), std::move(selector), std::move(args)}, pos};
    }

    // Brace arrays are parsed into a BlockExpr of expression statements so
    // they can travel through the generic argument list.
    Expr parse_brace() {
        Token open = take();
        BlockExpr items;
        while (!at(Tok::RBrace)) {
            if (at(Tok::Dot)) {
                take();
                continue;
            }
            Statement s;
            s.pos = cur().pos;
            s.node = ExprStmt{parse_expr()};
            items.body.push_back(std::move(s));
            if (!at(Tok::Dot) && !at(Tok::RBrace)) fail(cur(), "expected '.' or '}' in brace array");
        }
        take();
        return Expr{std::move(items), open.pos};
    }

    static std::vector<Expr> brace_items(Expr& brace) {
        std::vector<Expr> out;
        for (auto& s : brace.as<BlockExpr>()->body) out.push_back(std::get<ExprStmt>(s.node).value);
        return out;
    }

    Expr parse_binary() {
        Expr left = parse_unary();
        while (at(Tok::Binary) || at(Tok::Bar)) {
            SourcePos pos = cur().pos;
            std::string op = take().text;
            Expr right = parse_unary();
            std::vector<Expr> args;
            args.push_back(std::move(right));
            left = Expr{SendExpr{std::move(left), std::move(op), std::move(args)}, pos};
        }
        return left;
    }

    Expr parse_unary() {
        Expr recv = parse_primary();
        while (at(Tok::Identifier) && look(1).kind != Tok::Assign) {
            SourcePos pos = cur().pos;
            std::string sel = take().text;
            recv = Expr{SendExpr{std::move(recv), std::move(sel), {}}, pos};
        }
        return recv;
    }

    Expr parse_primary() {
        const Token& t = cur();
        SourcePos pos = t.pos;
        switch (t.kind) {
            case Tok::Integer: {
                Token n = take();
                return Expr{LiteralExpr{LiteralExpr::Kind::Integer, n.value, {}}, pos};
            }
            case Tok::Character: {
                Token c = take();
                return Expr{LiteralExpr{LiteralExpr::Kind::Character, c.value, {}}, pos};
            }
            case Tok::Symbol: {
                Token s = take();
                return Expr{LiteralExpr{LiteralExpr::Kind::Symbol, s.value, s.text}, pos};
            }
            case Tok::Identifier: {
                Token id = take();
                if (id.text == "nil") return Expr{LiteralExpr{LiteralExpr::Kind::Nil, 0, {}}, pos};
                if (id.text == "true") return Expr{LiteralExpr{LiteralExpr::Kind::True, 1, {}}, pos};
                if (id.text == "false") return Expr{LiteralExpr{LiteralExpr::Kind::False, 0, {}}, pos};
                return Expr{VarRefExpr{id.text}, pos};
            }
            case Tok::LParen: {
                take();
                Expr inner = parse_expr();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::LBracket:
                return parse_block();
            case Tok::LBrace:
                fail(t, "brace arrays are only allowed as VM call arguments");
            case Tok::Caret:
                fail(t, "unexpected '^' inside an expression");
            default:
                fail(t, t.kind == Tok::End ? "unexpected end of input" : "expected expression");
        }
    }

    Expr parse_block() {
        Token open = take();
        BlockExpr block;
        while (at(Tok::Colon)) {
            take();
            block.params.push_back(expect(Tok::Identifier, "block parameter name").text);
        }
        if (!block.params.empty()) {
            if (at_binary("||")) {
                // `[:a || t | ...]` : closing bar fused with the temps opener.
                take();
                while (at(Tok::Identifier)) block.temps.push_back(take().text);
                expect(Tok::Bar, "'|' closing block temporaries");
            } else if (at(Tok::Bar)) {
                take();
                if (at(Tok::Bar)) block.temps = parse_temps();
            } else if (!at(Tok::RBracket)) {
                fail(cur(), "expected '|' after block parameters");
            }
        } else if (at(Tok::Bar) || at_binary("||")) {
            block.temps = parse_temps();
        }
        std::set<std::string, std::less<>> names;
        for (const auto* list : {&block.params, &block.temps}) {
            for (const auto& n : *list) {
                if (declared(n) || !names.insert(n).second)
                    fail(open, "block variable '" + n + "' shadows or duplicates another variable");
            }
        }
        scopes_.push_back(std::move(names));
        block.body = parse_statements(Tok::RBracket);
        scopes_.pop_back();
        expect(Tok::RBracket, "']'");
        return Expr{std::move(block), open.pos};
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string class_name_;
    std::vector<std::set<std::string, std::less<>>> scopes_;
};

}  // namespace

MethodNode parse_method(std::string_view source, std::string_view class_name) {
    Lexer lexer(source);
    Parser parser(lexer.run(), std::string(class_name));
    return parser.parse_method();
}

MethodNode parse_method(const SourceMethod& src) {
    if (src.source.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ParseError(1, 1, "empty method source");
    MethodNode m = parse_method(src.source, src.class_name.empty() ? "Slang" : src.class_name);
    if (!src.selector.empty() && src.selector != m.selector)
        throw ParseError(1, 1, "pattern #" + m.selector + " does not match declared selector #" + src.selector);
    return m;
}

}  // namespace cascade
