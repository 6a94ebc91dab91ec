#pragma once

// Frozen sweep results for the four synthetic trace families at the
// 0.1%-of-working-set capacity rule.  Regenerate with
//   idss gen-trace --kind <K> --seed <S> --out t.csv
//   idss sweep --trace t.csv --capacity-frac 0.001
// and update the hit counts by hand: any change here is a behavior change.

#include <array>
#include <cstdint>

#include "idss/cachesim.hpp"
#include "idss/trace.hpp"

namespace golden {

struct Row {
    idss::sim::PolicyKind policy;
    std::uint64_t hits;
};

struct Sweep {
    idss::trace::Kind kind;
    const char* label;
    std::uint64_t seed;
    std::size_t capacity;  // capacity_for(stats, 0.001)
    std::uint64_t length;
    std::array<Row, 6> rows;  // kAllPolicies order
    idss::sim::PolicyKind mock_choice;  // advisor pick on the 400-request prefix
};

using idss::sim::PolicyKind;

inline constexpr std::array<Sweep, 4> kSweeps = {{
    {idss::trace::Kind::A,
     "A",
     7,
     4,
     6000,
     {{{PolicyKind::LRU, 2},
       {PolicyKind::LFU, 2},
       {PolicyKind::FIFO, 2},
       {PolicyKind::ARC, 2},
       {PolicyKind::LeCaR, 2},
       {PolicyKind::Cacheus, 2}}},
     PolicyKind::ARC},
    {idss::trace::Kind::B,
     "B",
     3,
     2,
     10000,
     {{{PolicyKind::LRU, 122},
       {PolicyKind::LFU, 146},
       {PolicyKind::FIFO, 121},
       {PolicyKind::ARC, 111},
       {PolicyKind::LeCaR, 124},
       {PolicyKind::Cacheus, 122}}},
     PolicyKind::LFU},
    {idss::trace::Kind::C,
     "C",
     1,
     1,
     10000,
     {{{PolicyKind::LRU, 0},
       {PolicyKind::LFU, 0},
       {PolicyKind::FIFO, 0},
       {PolicyKind::ARC, 0},
       {PolicyKind::LeCaR, 0},
       {PolicyKind::Cacheus, 0}}},
     PolicyKind::ARC},
    {idss::trace::Kind::D,
     "D",
     1,
     10,
     10000,
     {{{PolicyKind::LRU, 0},
       {PolicyKind::LFU, 0},
       {PolicyKind::FIFO, 0},
       {PolicyKind::ARC, 0},
       {PolicyKind::LeCaR, 0},
       {PolicyKind::Cacheus, 0}}},
     PolicyKind::ARC},
}};

}  // namespace golden
