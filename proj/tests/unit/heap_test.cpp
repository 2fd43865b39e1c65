#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <random>

#include "cascade/errors.hpp"
#include "cascade/heap.hpp"
#include "cascade/vm.hpp"

using namespace cascade;

namespace {

constexpr Word kNodeClass = 40;

// Graph built on the heap: slot 0 holds a tagged node id, the other slots
// hold references to other nodes or nil.
struct RandomGraph {
    std::vector<std::vector<int>> edges;  // by node id, -1 = nil
    std::vector<Word> roots;              // root cells, by index
    std::vector<int> root_ids;
};

RandomGraph build(Heap& heap, std::mt19937& rng, int nodes, int n_roots) {
    RandomGraph g;
    std::vector<Oop> objs;
    g.edges.resize(nodes);
    for (int i = 0; i < nodes; ++i) {
        Word slots = 1 + rng() % 4;
        Oop o = heap.allocate(kNodeClass, slots);
        Heap::slot(o, 0) = tag_int(i);
        objs.push_back(o);
    }
    for (int i = 0; i < nodes; ++i)
        for (Word s = 1; s < Heap::slot_count(objs[i]); ++s) {
            int target = rng() % 3 == 0 ? -1 : static_cast<int>(rng() % nodes);
            g.edges[i].push_back(target);
            Heap::slot(objs[i], s) = target < 0 ? heap.nil().bits() : objs[target].bits();
        }
    for (int r = 0; r < n_roots; ++r) {
        int id = static_cast<int>(rng() % nodes);
        g.root_ids.push_back(id);
        g.roots.push_back(objs[id].bits());
    }
    return g;
}

// Independent mark phase over the recorded edge lists.
std::set<int> mark(const RandomGraph& g) {
    std::set<int> live;
    std::vector<int> work(g.root_ids.begin(), g.root_ids.end());
    while (!work.empty()) {
        int n = work.back();
        work.pop_back();
        if (!live.insert(n).second) continue;
        for (int t : g.edges[n])
            if (t >= 0) work.push_back(t);
    }
    return live;
}

std::size_t node_bytes(const RandomGraph& g, int id) { return (kHeaderWords + 1 + g.edges[id].size()) * kWordBytes; }

}  // namespace

TEST(Heap, AllocateHasNilSlots) {
    Heap heap;
    Oop o = heap.allocate(18, 2);
    EXPECT_TRUE(o.is_reference());
    EXPECT_EQ(Heap::class_id_of(o), 18u);
    EXPECT_EQ(Heap::slot_count(o), 2u);
    EXPECT_EQ(Heap::slot(o, 0), heap.nil().bits());
    EXPECT_EQ(Heap::slot(o, 1), heap.nil().bits());
    EXPECT_TRUE(heap.is_movable(o));
    EXPECT_FALSE(heap.is_movable(heap.nil()));
}

TEST(Heap, BytesObject) {
    Heap heap;
    Oop s = heap.allocate_bytes(17, "hello, world");
    EXPECT_TRUE(Heap::is_bytes(s));
    EXPECT_EQ(Heap::bytes_of(s), "hello, world");
}

TEST(Heap, EmptyCollect) {
    Heap heap;
    CollectStats s = heap.collect();
    EXPECT_EQ(s.live_bytes, 0u);
    EXPECT_EQ(s.forwarded_count, 0u);
}

TEST(Heap, OversizedRequestIsOutOfMemory) {
    Heap heap(64 * 1024);
    EXPECT_THROW(heap.allocate(18, heap.semispace_bytes() / kWordBytes + 1), OutOfMemory);
}

TEST(Heap, LiveSetExhaustsSpace) {
    Heap heap(64 * 1024);
    std::vector<Word> roots(2000);
    for (auto& r : roots) heap.add_root(&r);
    EXPECT_THROW(
        for (auto& r : roots) r = heap.allocate(18, 6).bits(), OutOfMemory);
}

TEST(Heap, FullSpaceCollectsAutomatically) {
    Heap heap(64 * 1024);
    Word keep = heap.allocate(kNodeClass, 3).bits();
    heap.add_root(&keep);
    Heap::slot(Oop::from_bits(keep), 0) = tag_int(99);
    for (int i = 0; i < 20000; ++i) heap.allocate(kNodeClass, 4);
    EXPECT_GT(heap.collections(), 0u);
    EXPECT_EQ(Heap::slot(Oop::from_bits(keep), 0), tag_int(99));
    CollectStats s = heap.collect();
    EXPECT_EQ(s.live_bytes, (kHeaderWords + 3) * kWordBytes);
}

TEST(Heap, LiveBytesMatchMarkOracle) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        Heap heap(1 << 20);
        RandomGraph g = build(heap, rng, 20 + rng() % 200, 1 + rng() % 5);
        for (int i = 0; i < 100; ++i) heap.allocate(kNodeClass, rng() % 5);  // garbage
        for (auto& r : g.roots) heap.add_root(&r);
        auto live = mark(g);
        std::size_t expected = 0;
        for (int id : live) expected += node_bytes(g, id);

        CollectStats s = heap.collect();
        EXPECT_EQ(s.live_bytes, expected);
        EXPECT_EQ(s.forwarded_count, live.size());
        EXPECT_EQ(heap.used_bytes(), expected);

        // Same graph after the move: ids and edges survive.
        std::map<int, Oop> by_id;
        heap.walk([&](Oop o) { by_id[static_cast<int>(untag_int(Heap::slot(o, 0)))] = o; });
        EXPECT_EQ(by_id.size(), live.size());
        for (auto& [id, o] : by_id) {
            ASSERT_TRUE(live.count(id));
            for (std::size_t e = 0; e < g.edges[id].size(); ++e) {
                Word w = Heap::slot(o, e + 1);
                int t = g.edges[id][e];
                if (t < 0)
                    EXPECT_EQ(w, heap.nil().bits());
                else
                    EXPECT_EQ(w, by_id.at(t).bits());
            }
        }
        for (std::size_t r = 0; r < g.roots.size(); ++r)
            EXPECT_EQ(untag_int(Heap::slot(Oop::from_bits(g.roots[r]), 0)), static_cast<SignedWord>(g.root_ids[r]));
    }
}

TEST(Heap, RootSourcesAreUpdated) {
    Heap heap;
    std::vector<Word> cells{heap.allocate(kNodeClass, 1).bits()};
    int id = heap.add_root_source([&](const Heap::RootVisitor& visit) {
        for (auto& c : cells) visit(c);
    });
    Word before = cells[0];
    heap.collect();
    EXPECT_NE(cells[0], before);
    EXPECT_TRUE(heap.in_active(cells[0]));
    heap.remove_root_source(id);
    EXPECT_EQ(heap.collect().live_bytes, 0u);
}

TEST(Heap, StaticObjectsNeverMove) {
    Heap heap;
    Oop s = heap.allocate_static(2, 1);
    Word cell = s.bits();
    heap.add_root(&cell);
    heap.allocate(kNodeClass, 1);
    heap.collect();
    EXPECT_EQ(cell, s.bits());
}

TEST(Heap, TortureCollectsOnEveryAllocation) {
    Heap heap;
    heap.set_torture(true);
    for (int i = 0; i < 50; ++i) heap.allocate(kNodeClass, 1);
    EXPECT_GE(heap.collections(), 50u);
}

TEST(Heap, TortureFromEnvironment) {
    ::setenv("CASCADE_GC_TORTURE", "1", 1);
    VM on;
    ::unsetenv("CASCADE_GC_TORTURE");
    VM off;
    EXPECT_TRUE(on.heap().torture());
    EXPECT_FALSE(off.heap().torture());
}

// An object referenced only from the pinned slot survives a collection that
// native code triggers, and the native code reads it back through the slot.
TEST(PinnedSlot, ObjectSurvivesCollectionInsideNativeCode) {
    VmOptions options;
    options.gc_torture = true;
    VM vm(options);
    vm.install_primitive({"Slang", "",
                          "probe: o <var: #o type: #oop> | live | "
                          "live := self callVMFunction: #collectGarbage withArguments: {}. "
                          "^ (self fetchPointer: 1 ofObject: (self stackAt: 1)) + (self slotSizeOf: (self stackAt: 1))"});
    vm.ensure_compiled("probe:");
    for (int round = 0; round < 20; ++round) {
        Oop obj = vm.instantiate(vm.class_named("Point"));
        Heap::slot(obj, 0) = tag_int(round);
        Heap::slot(obj, 1) = static_cast<Word>(1000 + round);
        auto out = vm.invoke_raw("probe:", vm.nil(), std::span<const Oop>(&obj, 1), Backend::Native);
        ASSERT_FALSE(out.failed);
        EXPECT_EQ(out.raw, static_cast<Word>(1000 + round) + 2);
    }
    EXPECT_GT(vm.heap().collections(), 20u);
}

TEST(PinnedSlot, SlotWordFollowsTheMove) {
    VM vm;
    Oop obj = vm.instantiate(vm.class_named("Point"));
    Heap::slot(obj, 0) = tag_int(7);
    Heap::slot(obj, 1) = tag_int(8);
    vm.pinned().arg_count = 1;
    vm.pinned().args[0] = obj.bits();
    vm.heap().collect();
    Oop moved = Oop::from_bits(vm.pinned().args[0]);
    EXPECT_NE(moved.bits(), obj.bits());
    EXPECT_TRUE(vm.heap().in_active(moved.bits()));
    EXPECT_EQ(Heap::slot(moved, 0), tag_int(7));
    EXPECT_EQ(Heap::slot(moved, 1), tag_int(8));
    vm.pinned().arg_count = 0;
}
