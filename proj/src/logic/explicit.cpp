#include "specfence/logic/explicit.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <unordered_map>

namespace specfence::logic
{

using encode::State;
using encode::Trace;
using encode::TransitionSystem;

namespace
{

struct MissingInput
{
    std::size_t input;
};

// The terms of a system flattened into an array of nodes, children first.
struct Compiled
{
    struct Node
    {
        Op op;
        unsigned width;
        std::uint64_t value;
        std::uint32_t args[ 3 ];
    };
    std::vector< Node > nodes;
    std::vector< std::uint32_t > next;

    explicit Compiled( const TransitionSystem& ts )
    {
        std::unordered_map< const TermNode*, std::uint32_t > index;
        std::function< std::uint32_t( const Term& ) > add = [ & ]( const Term& t ) -> std::uint32_t {
            if ( auto it = index.find( t.get() ); it != index.end() )
                return it->second;
            Node n{ t.op(), t.width(), t.node().value, { 0, 0, 0 } };
            for ( std::size_t i = 0; i < t.args().size(); ++i )
                n.args[ i ] = add( t.args()[ i ] );
            nodes.push_back( n );
            const auto id = static_cast< std::uint32_t >( nodes.size() - 1 );
            index.emplace( t.get(), id );
            return id;
        };
        for ( const auto& t : ts.next )
            next.push_back( add( t ) );
    }
};

// Evaluates compiled terms over a concrete state and a partial input
// assignment, skipping subterms whose value cannot matter.
class LazyEvaluator
{
public:
    LazyEvaluator( const Compiled& c, const State& s, const std::vector< std::optional< std::uint64_t > >& in )
            : _c{ c }, _state{ s }, _inputs{ in }, _values( c.nodes.size() ), _known( c.nodes.size(), false )
    {
    }

    std::uint64_t eval( std::uint32_t id )
    {
        if ( _known[ id ] )
            return _values[ id ];
        const std::uint64_t v = compute( _c.nodes[ id ] );
        _values[ id ] = v;
        _known[ id ] = true;
        return v;
    }

private:
    std::uint64_t compute( const Compiled::Node& n )
    {
        const auto m = width_mask( n.width );
        auto arg = [ & ]( std::size_t i ) { return eval( n.args[ i ] ); };
        switch ( n.op )
        {
        case Op::Const: return n.value;
        case Op::Var: {
            if ( n.value < _state.size() )
                return _state[ n.value ] & m;
            const std::size_t j = n.value - _state.size();
            if ( j >= _inputs.size() )
                throw std::out_of_range( "explicit: variable is not a state or input" );
            if ( !_inputs[ j ] )
                throw MissingInput{ j };
            return *_inputs[ j ] & m;
        }
        case Op::Not: return ~arg( 0 ) & m;
        case Op::And:
            if ( n.width == 1 && arg( 0 ) == 0 )
                return 0;
            return arg( 0 ) & arg( 1 );
        case Op::Or:
            if ( n.width == 1 && arg( 0 ) == 1 )
                return 1;
            return arg( 0 ) | arg( 1 );
        case Op::Xor: return arg( 0 ) ^ arg( 1 );
        case Op::Add: return ( arg( 0 ) + arg( 1 ) ) & m;
        case Op::Sub: return ( arg( 0 ) - arg( 1 ) ) & m;
        case Op::Mul: return ( arg( 0 ) * arg( 1 ) ) & m;
        case Op::Eq: return arg( 0 ) == arg( 1 ) ? 1 : 0;
        case Op::Ult: return arg( 0 ) < arg( 1 ) ? 1 : 0;
        case Op::Ule: return arg( 0 ) <= arg( 1 ) ? 1 : 0;
        case Op::Ite: return arg( 0 ) ? arg( 1 ) : arg( 2 );
        case Op::Zext: return arg( 0 );
        case Op::Trunc: return arg( 0 ) & m;
        case Op::Extract: return ( arg( 0 ) >> n.value ) & 1;
        }
        throw std::logic_error( "explicit: unknown operator" );
    }

    const Compiled& _c;
    const State& _state;
    const std::vector< std::optional< std::uint64_t > >& _inputs;
    std::vector< std::uint64_t > _values;
    std::vector< bool > _known;
};

struct StateHash
{
    std::size_t operator()( const State& s ) const
    {
        std::size_t h = 0xcbf29ce484222325ULL;
        for ( auto v : s )
        {
            h ^= v + 0x9e3779b97f4a7c15ULL + ( h << 6 ) + ( h >> 2 );
        }
        return h;
    }
};

} // namespace

namespace
{

std::vector< std::pair< State, std::vector< std::uint64_t > > > expand( const TransitionSystem& ts, const Compiled& c,
                                                                         const State& s )
{
    std::vector< std::pair< State, std::vector< std::uint64_t > > > out;
    std::vector< std::vector< std::optional< std::uint64_t > > > pending{
            std::vector< std::optional< std::uint64_t > >( ts.num_inputs() ) };
    while ( !pending.empty() )
    {
        auto in = std::move( pending.back() );
        pending.pop_back();
        LazyEvaluator ev( c, s, in );
        try
        {
            State t( ts.num_state() );
            for ( std::size_t i = 0; i < t.size(); ++i )
                t[ i ] = ev.eval( c.next[ i ] );
            std::vector< std::uint64_t > full( in.size() );
            for ( std::size_t j = 0; j < in.size(); ++j )
                full[ j ] = in[ j ].value_or( 0 );
            out.emplace_back( std::move( t ), std::move( full ) );
        }
        catch ( const MissingInput& miss )
        {
            const unsigned w = ts.inputs[ miss.input ].width;
            if ( w > 20 )
                throw std::length_error( "explicit: input '" + ts.inputs[ miss.input ].name + "' is too wide to enumerate" );
            // Push in reverse so that lower values are expanded first.
            for ( std::uint64_t v = ( std::uint64_t{ 1 } << w ); v-- > 0; )
            {
                auto copy = in;
                copy[ miss.input ] = v;
                pending.push_back( std::move( copy ) );
            }
        }
    }
    return out;
}

} // namespace

std::vector< std::pair< State, std::vector< std::uint64_t > > > successors( const TransitionSystem& ts, const State& s )
{
    return expand( ts, Compiled( ts ), s );
}

ExplicitResult explicit_reachable( const TransitionSystem& full, const ExplicitOptions& options )
{
    const auto red = encode::cone_of_influence( full );
    const auto& ts = red.reduced;
    const Compiled compiled( ts );
    ExplicitResult result;

    // Free initial bits must fit in the budget before anything is expanded.
    std::vector< std::size_t > free_vars;
    std::size_t free_bits = 0;
    for ( std::size_t i = 0; i < ts.num_state(); ++i )
        if ( !ts.init_values[ i ] )
        {
            free_vars.push_back( i );
            free_bits += ts.state_vars[ i ].width;
        }
    if ( free_bits > 62 || ( std::uint64_t{ 1 } << free_bits ) > options.state_budget )
    {
        result.verdict = ExplicitVerdict::BudgetExceeded;
        return result;
    }

    struct Node
    {
        std::size_t parent;
        std::vector< std::uint64_t > inputs;
    };
    std::vector< State > states;
    std::vector< Node > nodes;
    std::unordered_map< State, std::size_t, StateHash > index;
    std::deque< std::size_t > frontier;

    auto finish = [ & ]( std::size_t id ) {
        Trace t;
        std::vector< std::size_t > chain;
        for ( std::size_t k = id; k != SIZE_MAX; k = nodes[ k ].parent )
            chain.push_back( k );
        std::reverse( chain.begin(), chain.end() );
        for ( std::size_t c = 0; c < chain.size(); ++c )
        {
            t.states.push_back( states[ chain[ c ] ] );
            if ( c > 0 )
                t.inputs.push_back( nodes[ chain[ c ] ].inputs );
        }
        result.verdict = ExplicitVerdict::Unsafe;
        result.trace = red.lift( full, t );
        result.states = states.size();
    };

    auto add = [ & ]( State s, std::size_t parent, std::vector< std::uint64_t > in ) -> std::optional< std::size_t > {
        if ( index.contains( s ) )
            return std::nullopt;
        const std::size_t id = states.size();
        index.emplace( s, id );
        states.push_back( std::move( s ) );
        nodes.push_back( { parent, std::move( in ) } );
        frontier.push_back( id );
        return id;
    };

    State s0( ts.num_state(), 0 );
    for ( std::size_t i = 0; i < s0.size(); ++i )
        if ( ts.init_values[ i ] )
            s0[ i ] = *ts.init_values[ i ];
    const std::uint64_t combos = std::uint64_t{ 1 } << free_bits;
    for ( std::uint64_t c = 0; c < combos; ++c )
    {
        std::uint64_t rest = c;
        for ( std::size_t v : free_vars )
        {
            const unsigned w = ts.state_vars[ v ].width;
            s0[ v ] = rest & width_mask( w );
            rest >>= w;
        }
        if ( auto id = add( s0, SIZE_MAX, {} ); id && ts.is_bad( states[ *id ] ) )
        {
            finish( *id );
            return result;
        }
    }

    while ( !frontier.empty() )
    {
        const std::size_t id = frontier.front();
        frontier.pop_front();
        for ( auto& [ t, in ] : expand( ts, compiled, states[ id ] ) )
        {
            auto nid = add( std::move( t ), id, std::move( in ) );
            if ( !nid )
                continue;
            if ( ts.is_bad( states[ *nid ] ) )
            {
                finish( *nid );
                return result;
            }
            if ( states.size() > options.state_budget )
            {
                result.verdict = ExplicitVerdict::BudgetExceeded;
                result.states = states.size();
                return result;
            }
        }
    }
    result.verdict = ExplicitVerdict::Safe;
    result.states = states.size();
    return result;
}

} // namespace specfence::logic
