#include "cascade/symbols.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cascade/errors.hpp"

namespace cascade {

void SymbolTable::add_internal(std::string name, Word address) {
    internal_.insert_or_assign(std::move(name), address);
}

void SymbolTable::merge(const std::vector<SymbolEntry>& entries) {
    for (const auto& e : entries)
        if (!internal_.count(e.name)) mapped_.insert_or_assign(e.name, e.address);
}

std::optional<Word> SymbolTable::find(std::string_view name) const {
    if (auto it = internal_.find(name); it != internal_.end()) return it->second;
    if (auto it = mapped_.find(name); it != mapped_.end()) return it->second;
    return std::nullopt;
}

Word SymbolTable::resolve(std::string_view name) const {
    if (auto a = find(name)) return *a;
    throw SymbolNotFound(std::string(name));
}

std::vector<SymbolEntry> parse_symbol_map(std::string_view text) {
    std::vector<SymbolEntry> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() == 2 && tok[0].size() == 1) continue;  // "U name": undefined reference
        if (tok.size() != 3) throw MapParseError(line_no, "expected <address> <type> <name>");
        if (tok[1].size() != 1) throw MapParseError(line_no, "bad type letter '" + tok[1] + "'");
        Word address = 0;
        const char* first = tok[0].data();
        const char* last = first + tok[0].size();
        auto [ptr, ec] = std::from_chars(first, last, address, 16);
        if (ec != std::errc() || ptr != last) throw MapParseError(line_no, "bad hex address '" + tok[0] + "'");
        char type = tok[1][0];
        if (type != 'T' && type != 't' && type != 'D' && type != 'd') continue;
        out.push_back(SymbolEntry{tok[2], address, type});
    }
    return out;
}

std::vector<SymbolEntry> load_symbol_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read symbol map " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_symbol_map(text.str());
}

}  // namespace cascade
