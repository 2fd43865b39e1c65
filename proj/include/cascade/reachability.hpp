#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ast.hpp"

namespace cascade {

/// Signature of a VM function callable through `callVMFunction:withArguments:`.
struct VmFunctionSig {
    std::string name;
    int arity = 0;
    bool returns_oop = false;
};

/// Selectors that are expanded inline instead of being called: arithmetic,
/// bit and memory operators plus the control templates.
const std::set<std::string, std::less<>>& template_selectors();
bool is_control_template(std::string_view selector);

/// Everything a send can resolve to. Resolution is by selector only.
struct MethodTable {
    std::map<std::string, MethodNode, std::less<>> methods;
    std::set<std::string, std::less<>> templates = template_selectors();
    std::map<std::string, VmFunctionSig, std::less<>> vm_functions;
    std::set<std::string, std::less<>> globals;

    void add_method(MethodNode method);
    void add_vm_function(VmFunctionSig sig);
    const MethodNode* find_method(std::string_view selector) const;
    const VmFunctionSig* find_vm_function(std::string_view name) const;
    bool is_template(std::string_view selector) const { return templates.count(selector) != 0; }

    /// Throws if methods, templates and VM functions are not disjoint.
    void check_disjoint() const;
};

struct ReachableSet {
    /// Entry first, then callees in depth-first discovery order.
    std::vector<std::string> selectors;
    /// VM functions referenced anywhere in the closure, sorted.
    std::set<std::string> vm_functions;
};

ReachableSet reachable_methods(std::string_view entry, const MethodTable& table);

}  // namespace cascade
