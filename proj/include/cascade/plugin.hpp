#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/vm.hpp"

namespace cascade {

enum class CompileMode { Lazy, Eager };

struct InstallRecord {
    std::string selector;
    std::chrono::system_clock::time_point compiled_at;
    int compile_count = 0;
};

/// A named group of primitives installed as a unit.
struct Plugin {
    std::string name;
    std::string target_class;
    Word target_class_id = 0;  // set by nativize
    CompileMode mode = CompileMode::Lazy;
    std::map<std::string, SourceMethod, std::less<>> methods;
    std::set<std::string, std::less<>> dirty;
    std::vector<InstallRecord> log;

    void add_method(SourceMethod src);
};

struct InstallReport {
    std::vector<std::string> installed;
    std::vector<std::pair<std::string, CompileError>> errors;
    bool ok() const { return errors.empty(); }
};

class PluginNativizer {
public:
    explicit PluginNativizer(VM& vm) : vm_(vm) {}

    /// Install every method as a primitive slot. Eager mode compiles now;
    /// methods that fail are reported and left uninstalled.
    InstallReport nativize(Plugin& p);
    /// Throws UnknownSelector for selectors the plugin does not own.
    void mark_dirty(Plugin& p, std::string_view selector);
    /// Replace a method's source and mark it dirty.
    void edit(Plugin& p, std::string_view selector, std::string source);
    /// call_primitive that keeps the install log current.
    Oop call(Plugin& p, std::string_view selector, Oop receiver, std::span<const Oop> args);

    int compile_count(std::string_view selector) const;
    /// Total compilations over the plugin's installed selectors.
    int total_compilations(const Plugin& p) const;

private:
    void record(Plugin& p, std::string_view selector);

    VM& vm_;
};

/// Read a plugin bundle: `plugin.manifest` (key=value lines: name, class,
/// mode) plus every `.slang` file in the directory.
Plugin load_plugin(const std::filesystem::path& dir);

}  // namespace cascade
