// TAC -> SSA. Phis go on the iterated dominance frontier of each non-local
// register's definition blocks (semi-pruned form), then registers are renamed
// along the dominator tree.

#include <algorithm>
#include <limits>
#include <set>

#include "cascade/errors.hpp"
#include "cascade/ir.hpp"

namespace cascade::ir {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> successor_indices(const IrFunction& fn, std::size_t i) {
    std::vector<std::size_t> out;
    for (BlockId s : fn.blocks[i].successors()) {
        std::size_t j = fn.index_of(s);
        if (std::find(out.begin(), out.end(), j) == out.end()) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> reverse_postorder(const IrFunction& fn) {
    std::vector<std::size_t> post;
    std::vector<char> seen(fn.blocks.size(), 0);
    // explicit stack: (block, next successor position)
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    std::vector<std::vector<std::size_t>> succs(fn.blocks.size());
    for (std::size_t i = 0; i < fn.blocks.size(); ++i) succs[i] = successor_indices(fn, i);
    stack.emplace_back(0, 0);
    seen[0] = 1;
    while (!stack.empty()) {
        auto& [b, pos] = stack.back();
        if (pos < succs[b].size()) {
            std::size_t s = succs[b][pos++];
            if (!seen[s]) {
                seen[s] = 1;
                stack.emplace_back(s, 0);
            }
        } else {
            post.push_back(b);
            stack.pop_back();
        }
    }
    std::reverse(post.begin(), post.end());
    return post;
}

void remove_unreachable(IrFunction& fn) {
    auto order = reverse_postorder(fn);
    std::vector<char> live(fn.blocks.size(), 0);
    for (auto i : order) live[i] = 1;
    std::vector<BasicBlock> kept;
    for (std::size_t i = 0; i < fn.blocks.size(); ++i)
        if (live[i]) kept.push_back(std::move(fn.blocks[i]));
    fn.blocks = std::move(kept);
}

void split_critical_edges(IrFunction& fn) {
    auto preds = fn.predecessors();
    BlockId next_id = 0;
    for (const auto& b : fn.blocks) next_id = std::max(next_id, b.id + 1);
    std::vector<BasicBlock> added;
    const std::size_t n = fn.blocks.size();
    for (std::size_t i = 0; i < n; ++i) {
        Instr& t = fn.blocks[i].terminator;
        if (t.op != Op::branch_if || t.targets[0] == t.targets[1]) continue;
        for (BlockId& target : t.targets) {
            if (preds[fn.index_of(target)].size() < 2) continue;
            BasicBlock edge;
            edge.id = next_id++;
            edge.terminator.op = Op::jump;
            edge.terminator.targets[0] = target;
            target = edge.id;
            added.push_back(std::move(edge));
        }
    }
    for (auto& b : added) fn.blocks.push_back(std::move(b));
}

std::vector<std::vector<std::size_t>> dominance_frontiers(const IrFunction& fn, const std::vector<std::size_t>& idom) {
    std::vector<std::vector<std::size_t>> df(fn.blocks.size());
    auto preds = fn.predecessors();
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
        if (preds[b].size() < 2) continue;
        for (BlockId p : preds[b]) {
            std::size_t runner = fn.index_of(p);
            while (runner != idom[b]) {
                if (std::find(df[runner].begin(), df[runner].end(), b) == df[runner].end()) df[runner].push_back(b);
                runner = idom[runner];
            }
        }
    }
    return df;
}

class Renamer {
public:
    Renamer(IrFunction& fn, const std::vector<std::size_t>& idom) : fn_(fn), old_vregs_(fn.vregs) {
        children_.resize(fn.blocks.size());
        for (std::size_t b = 1; b < fn.blocks.size(); ++b)
            if (idom[b] != kNone) children_[idom[b]].push_back(b);
        stacks_.resize(old_vregs_.size());
    }

    void run() {
        fn_.vregs.clear();
        // Receiver and parameters keep their numbering as entry definitions.
        VReg receiver = fresh(fn_.receiver);
        fn_.receiver = receiver;
        for (auto& p : fn_.params) p = fresh(p);
        walk(0);
        if (!undef_.empty()) {
            auto& entry = fn_.blocks[0].instrs;
            std::vector<Instr> moves;
            for (auto [old, reg] : undef_) {
                (void)old;
                Instr in;
                in.op = Op::move;
                in.dest = reg;
                in.operands = {Operand::of_imm(0)};
                moves.push_back(std::move(in));
            }
            entry.insert(entry.begin(), moves.begin(), moves.end());
        }
    }

private:
    VReg fresh(VReg old) {
        auto r = static_cast<VReg>(fn_.vregs.size());
        const auto& info = old_vregs_[old];
        fn_.vregs.push_back(VRegInfo{info.name, info.scope, old});
        stacks_[old].push_back(r);
        return r;
    }

    VReg current(VReg old) {
        if (!stacks_[old].empty()) return stacks_[old].back();
        auto it = std::find_if(undef_.begin(), undef_.end(), [&](const auto& u) { return u.first == old; });
        if (it != undef_.end()) return it->second;
        auto r = static_cast<VReg>(fn_.vregs.size());
        const auto& info = old_vregs_[old];
        fn_.vregs.push_back(VRegInfo{info.name, info.scope, old});
        undef_.emplace_back(old, r);
        return r;
    }

    void use(Operand& o) {
        if (o.is_reg()) o.reg = current(o.reg);
    }

    void walk(std::size_t b) {
        std::vector<VReg> pushed;
        BasicBlock& block = fn_.blocks[b];
        for (auto& phi : block.phis) {
            phi.dest = fresh(phi.origin);
            pushed.push_back(phi.origin);
        }
        for (auto& in : block.instrs) {
            for (auto& o : in.operands) use(o);
            if (in.dest) {
                VReg old = *in.dest;
                in.dest = fresh(old);
                pushed.push_back(old);
            }
        }
        for (auto& o : block.terminator.operands) use(o);
        for (BlockId s : block.successors()) {
            BasicBlock& succ = fn_.block(s);
            for (auto& phi : succ.phis)
                for (auto& inc : phi.incoming)
                    if (inc.pred == block.id) inc.value = current(phi.origin);
        }
        for (std::size_t c : children_[b]) walk(c);
        for (VReg old : pushed) stacks_[old].pop_back();
    }

    IrFunction& fn_;
    std::vector<VRegInfo> old_vregs_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::vector<VReg>> stacks_;
    std::vector<std::pair<VReg, VReg>> undef_;
};

}  // namespace

std::vector<std::size_t> immediate_dominators(const IrFunction& fn) {
    // Cooper, Harvey, Kennedy: iterate over reverse postorder until stable.
    const std::size_t n = fn.blocks.size();
    std::vector<std::size_t> idom(n, kNone);
    if (n == 0) return idom;
    auto order = reverse_postorder(fn);
    std::vector<std::size_t> rpo_index(n, kNone);
    for (std::size_t i = 0; i < order.size(); ++i) rpo_index[order[i]] = i;
    auto preds = fn.predecessors();
    idom[0] = 0;
    auto intersect = [&](std::size_t a, std::size_t b) {
        while (a != b) {
            while (rpo_index[a] > rpo_index[b]) a = idom[a];
            while (rpo_index[b] > rpo_index[a]) b = idom[b];
        }
        return a;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t k = 1; k < order.size(); ++k) {
            std::size_t b = order[k];
            std::size_t new_idom = kNone;
            for (BlockId p : preds[b]) {
                std::size_t pi = fn.index_of(p);
                if (idom[pi] == kNone) continue;
                new_idom = new_idom == kNone ? pi : intersect(pi, new_idom);
            }
            if (new_idom != idom[b]) {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    return idom;
}

std::set<VReg> non_local_registers(const IrFunction& fn) {
    std::set<VReg> out;
    auto scan = [&](std::set<VReg>& killed, const Operand& o) {
        if (o.is_reg() && !killed.count(o.reg)) out.insert(o.reg);
    };
    for (const auto& b : fn.blocks) {
        std::set<VReg> killed;
        for (const auto& in : b.instrs) {
            for (const auto& o : in.operands) scan(killed, o);
            if (in.dest) killed.insert(*in.dest);
        }
        for (const auto& o : b.terminator.operands) scan(killed, o);
    }
    return out;
}

IrFunction to_ssa(IrFunction fn) {
    if (fn.ssa) return fn;
    remove_unreachable(fn);
    split_critical_edges(fn);
    auto idom = immediate_dominators(fn);
    auto df = dominance_frontiers(fn, idom);
    auto preds = fn.predecessors();

    std::vector<std::set<std::size_t>> def_blocks(fn.vregs.size());
    def_blocks[fn.receiver].insert(0);
    for (VReg p : fn.params) def_blocks[p].insert(0);
    for (std::size_t b = 0; b < fn.blocks.size(); ++b)
        for (const auto& in : fn.blocks[b].instrs)
            if (in.dest) def_blocks[*in.dest].insert(b);

    for (VReg v : non_local_registers(fn)) {
        std::vector<std::size_t> work(def_blocks[v].begin(), def_blocks[v].end());
        std::set<std::size_t> has_phi;
        std::set<std::size_t> queued(def_blocks[v].begin(), def_blocks[v].end());
        while (!work.empty()) {
            std::size_t x = work.back();
            work.pop_back();
            for (std::size_t y : df[x]) {
                if (!has_phi.insert(y).second) continue;
                Phi phi;
                phi.dest = v;
                phi.origin = v;
                for (BlockId p : preds[y]) phi.incoming.push_back(PhiIncoming{p, v});
                fn.blocks[y].phis.push_back(std::move(phi));
                if (queued.insert(y).second) work.push_back(y);
            }
        }
    }

    Renamer(fn, idom).run();
    fn.ssa = true;
    fn.frame_hint = static_cast<std::uint32_t>(fn.vregs.size());
    return fn;
}

}  // namespace cascade::ir
