#pragma once

#include "specfence/ir/program.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace specfence::threat
{

enum class ThreatModel
{
    Strong,
    Classical,
};

enum class VInstReason
{
    StrongAllMemory,
    TaintedIndex,
};

struct VInstSet
{
    std::map< ir::Label, VInstReason > labels;

    [[nodiscard]] bool contains( ir::Label l ) const { return labels.contains( l ); }
    [[nodiscard]] bool empty() const { return labels.empty(); }
    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] std::set< ir::Label > label_set() const;
};

// Taint of a value, as a bit set. Attacker marks values the attacker
// controls directly or by arithmetic; Derived marks values read from memory
// at a tainted position, which is what a nested access can reveal.
enum TaintBit : std::uint8_t
{
    Attacker = 1,
    Derived = 2,
};

struct TaintState
{
    // Variable or array name to its taint bits; absent means untainted.
    std::map< std::string, std::uint8_t > taint;

    [[nodiscard]] std::uint8_t of( const std::string& name ) const;
    [[nodiscard]] std::set< std::string > tainted() const;
    bool join( const TaintState& other );
    friend bool operator==( const TaintState&, const TaintState& ) = default;
};

struct TaintMap
{
    std::vector< TaintState > before;
    std::vector< TaintState > after;
};

enum class WorklistOrder
{
    Forward,
    Reverse,
};

std::uint8_t expr_taint( const ir::Expr& e, const TaintState& s );

TaintMap taint_map( const ir::Program& p, WorklistOrder order = WorklistOrder::Forward );

VInstSet compute_vinst( const ir::Program& p, ThreatModel model, bool loads_only = false );

bool has_inputs( const ir::Program& p );

std::string render_taint_map( const ir::Program& p, const TaintMap& map );

std::string to_string( ThreatModel m );

} // namespace specfence::threat
