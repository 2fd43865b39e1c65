#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"

namespace cascade {

std::string_view basic_type_name(BasicType type) {
    switch (type) {
        case BasicType::Word: return "word";
        case BasicType::SignedWord: return "int";
        case BasicType::OopRef: return "oop";
        case BasicType::Address: return "address";
    }
    return "word";
}

std::optional<BasicType> basic_type_from_name(std::string_view name) {
    if (name == "word" || name == "usqInt" || name == "unsigned") return BasicType::Word;
    if (name == "int" || name == "sqInt" || name == "signed") return BasicType::SignedWord;
    if (name == "oop") return BasicType::OopRef;
    if (name == "address" || name == "pointer") return BasicType::Address;
    return std::nullopt;
}

bool is_binary_selector(std::string_view selector) {
    if (selector.empty()) return false;
    return std::all_of(selector.begin(), selector.end(), [](char c) {
        return std::string_view("+-*/\\<>=~&@%,?|").find(c) != std::string_view::npos;
    });
}

int selector_arity(std::string_view selector) {
    if (is_binary_selector(selector)) return 1;
    return static_cast<int>(std::count(selector.begin(), selector.end(), ':'));
}

bool MethodNode::is_primitive() const {
    return std::any_of(pragmas.begin(), pragmas.end(),
                       [](const PragmaNode& p) { return p.kind == PragmaNode::Kind::Primitive; });
}

VarInfo MethodNode::var_info(std::string_view name) const {
    auto it = var_types.find(name);
    return it == var_types.end() ? VarInfo{} : it->second;
}

bool MethodNode::declares(std::string_view name) const {
    return std::find(params.begin(), params.end(), name) != params.end() ||
           std::find(temps.begin(), temps.end(), name) != temps.end();
}

// ---------------------------------------------------------------------------
// purify

namespace {

struct CCodeEntry {
    std::string_view c_name;
    std::string_view vm_function;
};

// Inlined-C calls that have a VM-function equivalent.
constexpr CCodeEntry kCCodeTable[] = {
    {"printOop", "printOop"},
    {"primitiveNew", "primitiveNew"},
    {"instantiateClass", "instantiateClass"},
    {"createDirectory", "createDirectory"},
    {"writeFile", "writeFile"},
    {"readFile", "readFile"},
    {"fullGC", "collectGarbage"},
    {"primitiveFail", "primitiveFail"},
};

// C type spellings accepted in string-typed pragmas.
struct CTypeEntry {
    std::string_view c_type;
    std::string_view symbol;
};

constexpr CTypeEntry kCTypeTable[] = {
    {"sqInt", "int"},     {"usqInt", "word"},      {"int", "int"},
    {"unsigned", "word"}, {"char *", "address"},   {"void *", "address"},
    {"sqInt *", "address"}, {"oop", "oop"},
};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string rewrite_ccode(std::string_view payload) {
    auto open = payload.find('(');
    auto close = payload.rfind(')');
    std::string name = trim(payload.substr(0, open));
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw UnsupportedIdiom(name.empty() ? std::string(payload) : name);
    const CCodeEntry* entry = nullptr;
    for (const auto& e : kCCodeTable)
        if (e.c_name == name) entry = &e;
    if (entry == nullptr) throw UnsupportedIdiom(name);

    std::vector<std::string> args;
    std::string_view inner = payload.substr(open + 1, close - open - 1);
    if (!trim(inner).empty()) {
        std::size_t start = 0;
        for (;;) {
            auto comma = inner.find(',', start);
            args.push_back(trim(inner.substr(start, comma == std::string_view::npos ? inner.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    std::string out = "callVMFunction: #";
    out += entry->vm_function;
    out += " withArguments: {";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ". ";
        out += args[i];
    }
    out += "}";
    return out;
}

}  // namespace

std::string purify(std::string_view source) {
    std::string out;
    out.reserve(source.size());
    std::size_t i = 0;
    auto starts_keyword = [&](std::size_t at, std::string_view kw) {
        if (source.substr(at, kw.size()) != kw) return false;
        return at == 0 || !(std::isalnum(static_cast<unsigned char>(source[at - 1])) || source[at - 1] == '_');
    };
    while (i < source.size()) {
        // Comments are copied verbatim.
        if (source[i] == '"') {
            auto end = source.find('"', i + 1);
            std::size_t stop = end == std::string_view::npos ? source.size() : end + 1;
            out.append(source.substr(i, stop - i));
            i = stop;
            continue;
        }
        bool is_ccode = starts_keyword(i, "cCode:");
        bool is_type = starts_keyword(i, "type:");
        if (is_ccode || is_type) {
            std::size_t kw_len = is_ccode ? 6 : 5;
            std::size_t j = i + kw_len;
            while (j < source.size() && std::isspace(static_cast<unsigned char>(source[j]))) ++j;
            if (j < source.size() && source[j] == '\'') {
                auto end = source.find('\'', j + 1);
                if (end == std::string_view::npos) throw UnsupportedIdiom("unterminated string");
                std::string_view payload = source.substr(j + 1, end - j - 1);
                if (is_ccode) {
                    out += rewrite_ccode(payload);
                } else {
                    std::string spelled = trim(payload);
                    const CTypeEntry* entry = nullptr;
                    for (const auto& e : kCTypeTable)
                        if (e.c_type == spelled) entry = &e;
                    if (entry == nullptr) throw UnsupportedIdiom(spelled);
                    out += "type: #";
                    out += entry->symbol;
                }
                i = end + 1;
                continue;
            }
        }
        out.push_back(source[i]);
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// annotate_types

namespace {

class TypeAnnotator {
public:
    explicit TypeAnnotator(const MethodNode& m) : method_(m) {}

    void statements(std::vector<Statement>& body) {
        for (auto& s : body) {
            std::visit([&](auto& node) { expr(node.value); }, s.node);
        }
    }

    BasicType expr(Expr& e) {
        if (auto* lit = e.as<LiteralExpr>()) {
            if (lit->kind == LiteralExpr::Kind::Integer && static_cast<SignedWord>(lit->value) < 0)
                return BasicType::SignedWord;
            return BasicType::Word;
        }
        if (auto* ref = e.as<VarRefExpr>()) {
            if (ref->name == "self") return BasicType::OopRef;
            for (const auto& scope : block_vars_)
                if (scope.count(ref->name)) return BasicType::Word;
            return method_.var_info(ref->name).type;
        }
        if (auto* call = e.as<VmCallExpr>()) {
            for (auto& a : call->args) expr(a);
            return BasicType::Word;
        }
        if (auto* block = e.as<BlockExpr>()) {
            std::set<std::string, std::less<>> vars(block->params.begin(), block->params.end());
            vars.insert(block->temps.begin(), block->temps.end());
            block_vars_.push_back(std::move(vars));
            statements(block->body);
            block_vars_.pop_back();
            return BasicType::Word;
        }
        auto& send = *e.as<SendExpr>();
        BasicType recv = expr(*send.receiver);
        bool any_signed = recv == BasicType::SignedWord;
        for (auto& a : send.args) any_signed |= expr(a) == BasicType::SignedWord;
        const std::string& sel = send.selector;
        if (sel == "bitShift:" || sel == ">>") {
            send.is_signed = recv == BasicType::SignedWord;
            return recv == BasicType::SignedWord ? BasicType::SignedWord : BasicType::Word;
        }
        static const std::set<std::string, std::less<>> kSignedSensitive = {
            "/", "//", "\\\\", "<", "<=", ">", ">="};
        static const std::set<std::string, std::less<>> kArithmetic = {
            "+", "-", "*", "/", "//", "\\\\", "bitAnd:", "bitOr:", "bitXor:", "<<", "negated", "bitInvert"};
        if (kSignedSensitive.count(sel)) send.is_signed = any_signed;
        if (kArithmetic.count(sel)) return any_signed ? BasicType::SignedWord : BasicType::Word;
        return BasicType::Word;
    }

private:
    const MethodNode& method_;
    std::vector<std::set<std::string, std::less<>>> block_vars_;
};

}  // namespace

MethodNode annotate_types(MethodNode m) {
    m.var_types.clear();
    for (const auto& p : m.params) m.var_types[p] = VarInfo{};
    for (const auto& t : m.temps) m.var_types[t] = VarInfo{};
    m.return_type = BasicType::Word;
    for (const auto& pragma : m.pragmas) {
        if (pragma.kind == PragmaNode::Kind::TypeAnnotation) {
            auto it = m.var_types.find(pragma.var_name);
            if (it == m.var_types.end()) throw UnknownVariableInPragma(pragma.var_name);
            it->second = VarInfo{pragma.type, pragma.by_reference};
        } else if (pragma.kind == PragmaNode::Kind::ReturnType) {
            m.return_type = pragma.type;
        }
    }
    TypeAnnotator annotator(m);
    annotator.statements(m.body);
    m.annotated = true;
    return m;
}

// ---------------------------------------------------------------------------
// printing

namespace {

void print_statements(std::ostringstream& out, const std::vector<Statement>& body, const std::string& indent,
                      const std::string& sep);

void print_expr_to(std::ostringstream& out, const Expr& e, bool nested) {
    if (const auto* lit = e.as<LiteralExpr>()) {
        switch (lit->kind) {
            case LiteralExpr::Kind::Integer: out << static_cast<SignedWord>(lit->value); break;
            case LiteralExpr::Kind::Character: out << '$' << static_cast<char>(lit->value); break;
            case LiteralExpr::Kind::Symbol: out << '#' << lit->text; break;
            case LiteralExpr::Kind::Nil: out << "nil"; break;
            case LiteralExpr::Kind::True: out << "true"; break;
            case LiteralExpr::Kind::False: out << "false"; break;
        }
        return;
    }
    if (const auto* ref = e.as<VarRefExpr>()) {
        out << ref->name;
        return;
    }
    if (const auto* block = e.as<BlockExpr>()) {
        out << '[';
        for (const auto& p : block->params) out << " :" << p;
        if (!block->params.empty()) out << " |";
        if (!block->temps.empty()) {
            out << " |";
            for (const auto& t : block->temps) out << ' ' << t;
            out << " |";
        }
        out << ' ';
        print_statements(out, block->body, "", ". ");
        out << ']';
        return;
    }
    if (const auto* call = e.as<VmCallExpr>()) {
        if (nested) out << '(';
        out << "self callVMFunction: #" << call->function << " withArguments: {";
        for (std::size_t i = 0; i < call->args.size(); ++i) {
            if (i) out << ". ";
            print_expr_to(out, call->args[i], false);
        }
        out << '}';
        if (nested) out << ')';
        return;
    }
    const auto& send = *e.as<SendExpr>();
    if (nested) out << '(';
    print_expr_to(out, *send.receiver, true);
    if (send.args.empty()) {
        out << ' ' << send.selector;
    } else if (is_binary_selector(send.selector)) {
        out << ' ' << send.selector << ' ';
        print_expr_to(out, send.args[0], true);
    } else {
        std::size_t start = 0;
        for (const auto& arg : send.args) {
            auto colon = send.selector.find(':', start);
            out << ' ' << send.selector.substr(start, colon - start + 1) << ' ';
            print_expr_to(out, arg, true);
            start = colon + 1;
        }
    }
    if (nested) out << ')';
}

void print_statements(std::ostringstream& out, const std::vector<Statement>& body, const std::string& indent,
                      const std::string& sep) {
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (i) out << sep;
        out << indent;
        const auto& s = body[i];
        if (const auto* a = s.as<AssignStmt>()) {
            out << a->target << " := ";
            print_expr_to(out, a->value, false);
        } else if (const auto* r = s.as<ReturnStmt>()) {
            out << "^ ";
            print_expr_to(out, r->value, false);
        } else {
            print_expr_to(out, s.as<ExprStmt>()->value, false);
        }
    }
}

}  // namespace

std::string print_expr(const Expr& expr) {
    std::ostringstream out;
    print_expr_to(out, expr, false);
    return out.str();
}

std::string print_method(const MethodNode& m) {
    std::ostringstream out;
    if (m.params.empty()) {
        out << m.selector;
    } else if (is_binary_selector(m.selector)) {
        out << m.selector << ' ' << m.params[0];
    } else {
        std::size_t start = 0;
        for (std::size_t i = 0; i < m.params.size(); ++i) {
            auto colon = m.selector.find(':', start);
            if (i) out << ' ';
            out << m.selector.substr(start, colon - start + 1) << ' ' << m.params[i];
            start = colon + 1;
        }
    }
    out << '\n';
    for (const auto& p : m.pragmas) {
        switch (p.kind) {
            case PragmaNode::Kind::Primitive: out << "\t<primitive>\n"; break;
            case PragmaNode::Kind::TypeAnnotation:
                out << "\t<var: #" << p.var_name << " type: #" << basic_type_name(p.type);
                if (p.by_reference) out << " ref: true";
                out << ">\n";
                break;
            case PragmaNode::Kind::ReturnType:
                out << "\t<returns: #" << basic_type_name(p.type) << ">\n";
                break;
        }
    }
    if (!m.temps.empty()) {
        out << "\t|";
        for (const auto& t : m.temps) out << ' ' << t;
        out << " |\n";
    }
    print_statements(out, m.body, "\t", ".\n");
    if (!m.body.empty()) out << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// source files

std::vector<SourceMethod> split_source_bundle(std::string_view text, std::string_view default_class) {
    static const std::regex kHeader(R"(^([A-Z][A-Za-z0-9_]*)>>(\S+)\s*$)");
    std::vector<SourceMethod> out;
    std::istringstream in{std::string(text)};
    std::string line;
    bool bundle = false;
    SourceMethod current;
    auto flush = [&] {
        if (bundle && current.source.find_first_not_of(" \t\r\n") != std::string::npos) out.push_back(current);
    };
    while (std::getline(in, line)) {
        std::smatch match;
        if (std::regex_match(line, match, kHeader)) {
            flush();
            bundle = true;
            current = SourceMethod{match[1].str(), match[2].str(), {}};
            continue;
        }
        if (bundle) {
            current.source += line;
            current.source += '\n';
        }
    }
    flush();
    if (!bundle) {
        SourceMethod single{std::string(default_class), {}, std::string(text)};
        try {
            single.selector = parse_method(purify(single.source), single.class_name).selector;
        } catch (const Error&) {
            // Left empty; the error resurfaces when the method is compiled.
        }
        out.push_back(std::move(single));
    }
    return out;
}

std::vector<SourceMethod> load_source_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return split_source_bundle(buf.str(), "Slang");
}

MethodNode compile_front(const SourceMethod& src) {
    SourceMethod purified = src;
    purified.source = purify(src.source);
    return annotate_types(parse_method(purified));
}

}  // namespace cascade
