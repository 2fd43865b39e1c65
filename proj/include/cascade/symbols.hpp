#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/word.hpp"

namespace cascade {

struct SymbolEntry {
    std::string name;
    Word address = 0;
    char type = 'T';
};

/// Name -> address for VM functions and globals. Entries registered by the VM
/// itself win over entries read from a map file.
class SymbolTable {
public:
    void add_internal(std::string name, Word address);
    void add_internal(std::string name, const void* address) {
        add_internal(std::move(name), reinterpret_cast<Word>(address));
    }
    /// Merge map-file entries; names already registered internally are kept.
    void merge(const std::vector<SymbolEntry>& entries);

    std::optional<Word> find(std::string_view name) const;
    /// Throws SymbolNotFound.
    Word resolve(std::string_view name) const;
    bool is_internal(std::string_view name) const { return internal_.count(name) != 0; }
    std::size_t size() const { return internal_.size() + mapped_.size(); }

private:
    std::map<std::string, Word, std::less<>> internal_;
    std::map<std::string, Word, std::less<>> mapped_;
};

/// Parse nm-style text: `<hex-address> <type-letter> <name>`. Only T/t/D/d
/// lines produce entries; other letters and two-field `U name` lines are
/// skipped; `#` starts a comment. Throws MapParseError.
std::vector<SymbolEntry> parse_symbol_map(std::string_view text);
std::vector<SymbolEntry> load_symbol_map(const std::filesystem::path& path);

}  // namespace cascade
