#include "cascade/plugin.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cascade/frontend.hpp"

namespace cascade {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void Plugin::add_method(SourceMethod src) {
    if (src.selector.empty()) src.selector = parse_method(purify(src.source), src.class_name).selector;
    std::string key = src.selector;
    methods.insert_or_assign(std::move(key), std::move(src));
}

InstallReport PluginNativizer::nativize(Plugin& p) {
    InstallReport report;
    p.target_class_id = untag_int(Heap::slot(vm_.define_class(p.target_class, 0), 0));
    for (auto& [selector, src] : p.methods) {
        try {
            compile_front(src);
        } catch (const std::exception& e) {
            report.errors.emplace_back(selector, CompileError("parse", e.what()));
            continue;
        }
        vm_.install_primitive(src);
        if (p.mode == CompileMode::Eager) {
            try {
                vm_.ensure_compiled(selector);
                record(p, selector);
            } catch (const CompileError& e) {
                report.errors.emplace_back(selector, e);
                continue;
            }
        }
        report.installed.push_back(selector);
    }
    // Failed eager compiles leave no half-installed slot behind.
    for (const auto& [selector, error] : report.errors)
        if (auto* slot = vm_.primitive(selector); slot && slot->state == PrimitiveSlot::State::Source)
            vm_.remove_primitive(selector);
    return report;
}

void PluginNativizer::mark_dirty(Plugin& p, std::string_view selector) {
    if (p.methods.find(selector) == p.methods.end()) throw UnknownSelector(std::string(selector), p.name);
    vm_.mark_dirty(selector);
    p.dirty.insert(std::string(selector));
}

void PluginNativizer::edit(Plugin& p, std::string_view selector, std::string source) {
    auto it = p.methods.find(selector);
    if (it == p.methods.end()) throw UnknownSelector(std::string(selector), p.name);
    it->second.source = source;
    vm_.update_source(selector, std::move(source));
    mark_dirty(p, selector);
}

Oop PluginNativizer::call(Plugin& p, std::string_view selector, Oop receiver, std::span<const Oop> args) {
    int before = compile_count(selector);
    struct Log {
        PluginNativizer& self;
        Plugin& p;
        std::string_view selector;
        int before;
        ~Log() {
            if (self.compile_count(selector) != before) self.record(p, selector);
        }
    } log{*this, p, selector, before};
    return vm_.call_primitive(selector, receiver, args);
}

int PluginNativizer::compile_count(std::string_view selector) const {
    const auto* slot = vm_.primitive(selector);
    return slot ? slot->compile_count : 0;
}

int PluginNativizer::total_compilations(const Plugin& p) const {
    int total = 0;
    for (const auto& [selector, src] : p.methods) total += compile_count(selector);
    return total;
}

void PluginNativizer::record(Plugin& p, std::string_view selector) {
    p.log.push_back({std::string(selector), std::chrono::system_clock::now(), compile_count(selector)});
    if (auto it = p.dirty.find(selector); it != p.dirty.end()) p.dirty.erase(it);
}

Plugin load_plugin(const std::filesystem::path& dir) {
    Plugin p;
    std::ifstream manifest(dir / "plugin.manifest");
    if (!manifest) throw Error("missing plugin.manifest in " + dir.string());
    std::string line;
    int line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw Error("plugin.manifest:" + std::to_string(line_no) + ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key == "name") {
            p.name = value;
        } else if (key == "class") {
            p.target_class = value;
        } else if (key == "mode") {
            if (value == "lazy")
                p.mode = CompileMode::Lazy;
            else if (value == "eager")
                p.mode = CompileMode::Eager;
            else
                throw Error("plugin.manifest: mode must be lazy or eager");
        } else {
            throw Error("plugin.manifest: unknown key " + key);
        }
    }
    if (p.name.empty()) throw Error("plugin.manifest: name is required");
    if (p.target_class.empty()) p.target_class = p.name;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".slang") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
        for (auto& m : load_source_file(f)) {
            m.class_name = p.target_class;
            p.add_method(std::move(m));
        }
    return p;
}

}  // namespace cascade
