#include "specfence/threat/threat.hpp"

#include <deque>
#include <sstream>

namespace specfence::threat
{

using namespace ir;

std::set< Label > VInstSet::label_set() const
{
    std::set< Label > out;
    for ( const auto& [ l, _ ] : labels )
        out.insert( l );
    return out;
}

std::uint8_t TaintState::of( const std::string& name ) const
{
    auto it = taint.find( name );
    return it == taint.end() ? 0 : it->second;
}

std::set< std::string > TaintState::tainted() const
{
    std::set< std::string > out;
    for ( const auto& [ n, t ] : taint )
        if ( t != 0 )
            out.insert( n );
    return out;
}

bool TaintState::join( const TaintState& other )
{
    bool changed = false;
    for ( const auto& [ n, t ] : other.taint )
    {
        auto& mine = taint[ n ];
        if ( ( mine | t ) != mine )
        {
            mine |= t;
            changed = true;
        }
    }
    return changed;
}

std::uint8_t expr_taint( const Expr& e, const TaintState& s )
{
    if ( e.kind == ExprKind::Var )
        return s.of( e.name );
    std::uint8_t t = 0;
    for ( const auto& a : e.args )
        t |= expr_taint( *a, s );
    return t;
}

namespace
{

void set_taint( TaintState& s, const std::string& name, std::uint8_t t )
{
    if ( t == 0 )
        s.taint.erase( name );
    else
        s.taint[ name ] = t;
}

TaintState transfer( const Program& p, Label l, TaintState s )
{
    std::visit(
            [ & ]( const auto& inst ) {
                using T = std::decay_t< decltype( inst ) >;
                if constexpr ( std::is_same_v< T, Assign > )
                    set_taint( s, inst.dest, expr_taint( *inst.value, s ) );
                else if constexpr ( std::is_same_v< T, Load > )
                {
                    std::uint8_t t = s.of( inst.array );
                    if ( expr_taint( *inst.index, s ) != 0 )
                        t |= Derived;
                    set_taint( s, inst.dest, t );
                }
                else if constexpr ( std::is_same_v< T, Store > )
                {
                    const std::uint8_t t = expr_taint( *inst.value, s );
                    if ( t != 0 )
                        s.taint[ inst.array ] |= t;
                }
            },
            p.insts[ l ] );
    return s;
}

TaintState entry_state( const Program& p )
{
    TaintState s;
    for ( const auto& v : p.vars )
        if ( v.input )
            s.taint[ v.name ] = Attacker;
    return s;
}

} // namespace

bool has_inputs( const Program& p )
{
    for ( const auto& v : p.vars )
        if ( v.input )
            return true;
    return false;
}

TaintMap taint_map( const Program& p, WorklistOrder order )
{
    const std::size_t n = p.insts.size();
    TaintMap m;
    m.before.assign( n, {} );
    m.after.assign( n, {} );
    std::vector< bool > reached( n, false );
    std::vector< bool > queued( n, false );
    std::deque< Label > work;
    auto enqueue = [ & ]( Label l ) {
        if ( !queued[ l ] )
        {
            queued[ l ] = true;
            if ( order == WorklistOrder::Forward )
                work.push_back( l );
            else
                work.push_front( l );
        }
    };
    m.before[ 0 ] = entry_state( p );
    reached[ 0 ] = true;
    enqueue( 0 );
    while ( !work.empty() )
    {
        Label l;
        if ( order == WorklistOrder::Forward )
        {
            l = work.front();
            work.pop_front();
        }
        else
        {
            l = work.back();
            work.pop_back();
        }
        queued[ l ] = false;
        m.after[ l ] = transfer( p, l, m.before[ l ] );
        for ( Label s : successors( p, l ) )
        {
            if ( s >= n )
                continue;
            const bool changed = m.before[ s ].join( m.after[ l ] );
            if ( changed || !reached[ s ] )
            {
                reached[ s ] = true;
                enqueue( s );
            }
        }
    }
    return m;
}

VInstSet compute_vinst( const Program& p, ThreatModel model, bool loads_only )
{
    VInstSet out;
    if ( model == ThreatModel::Strong )
    {
        for ( Label l : memory_instructions( p ) )
            if ( !loads_only || std::holds_alternative< Load >( p.insts[ l ] ) )
                out.labels.emplace( l, VInstReason::StrongAllMemory );
        return out;
    }
    const auto map = taint_map( p );
    for ( Label l : memory_instructions( p ) )
    {
        const Expr* index = nullptr;
        if ( const auto* ld = std::get_if< Load >( &p.insts[ l ] ) )
            index = ld->index.get();
        else if ( !loads_only )
            index = std::get< Store >( p.insts[ l ] ).index.get();
        if ( index != nullptr && ( expr_taint( *index, map.before[ l ] ) & Derived ) != 0 )
            out.labels.emplace( l, VInstReason::TaintedIndex );
    }
    return out;
}

std::string render_taint_map( const Program& p, const TaintMap& map )
{
    std::ostringstream os;
    auto names = []( const TaintState& s ) {
        std::string out = "{";
        bool first = true;
        for ( const auto& [ n, t ] : s.taint )
        {
            if ( t == 0 )
                continue;
            out += ( first ? "" : ", " ) + n;
            if ( ( t & Derived ) != 0 )
                out += "*";
            first = false;
        }
        return out + "}";
    };
    for ( Label l = 0; l < p.insts.size(); ++l )
        os << label_name( l ) << ": before " << names( map.before[ l ] ) << " after " << names( map.after[ l ] ) << "\n";
    return os.str();
}

std::string to_string( ThreatModel m ) { return m == ThreatModel::Strong ? "strong" : "classical"; }

} // namespace specfence::threat
