#include "specfence/encode/transition_system.hpp"

#include <algorithm>
#include <sstream>

namespace specfence::encode
{

using namespace logic;

std::string to_string( const SpeculationMode& m )
{
    return m.bound ? "bounded:" + std::to_string( *m.bound ) : "unbounded";
}

std::string to_string( Placement p )
{
    switch ( p )
    {
    case Placement::EveryInst: return "every-inst";
    case Placement::AfterBranch: return "after-branch";
    case Placement::BeforeMemory: return "before-memory";
    }
    return "?";
}

void TransitionSystem::declare_terms()
{
    const std::size_t s = state_vars.size();
    const std::size_t n = inputs.size();
    _state_terms.clear();
    _input_terms.clear();
    _next_terms.clear();
    for ( std::size_t i = 0; i < s; ++i )
        _state_terms.push_back( variable( state_vars[ i ].name, state_vars[ i ].width, i ) );
    for ( std::size_t j = 0; j < n; ++j )
        _input_terms.push_back( variable( inputs[ j ].name, inputs[ j ].width, s + j ) );
    for ( std::size_t i = 0; i < s; ++i )
        _next_terms.push_back( variable( state_vars[ i ].name + "'", state_vars[ i ].width, s + n + i ) );
}

std::optional< std::size_t > TransitionSystem::find_state( const std::string& n ) const
{
    for ( std::size_t i = 0; i < state_vars.size(); ++i )
        if ( state_vars[ i ].name == n )
            return i;
    return std::nullopt;
}

std::optional< std::size_t > TransitionSystem::find_input( const std::string& n ) const
{
    for ( std::size_t j = 0; j < inputs.size(); ++j )
        if ( inputs[ j ].name == n )
            return j;
    return std::nullopt;
}

Formula TransitionSystem::init() const
{
    std::vector< Formula > parts;
    for ( std::size_t i = 0; i < state_vars.size(); ++i )
        if ( init_values[ i ] )
            parts.push_back( eq( state_term( i ), constant( *init_values[ i ], state_vars[ i ].width ) ) );
    return conj( parts );
}

Formula TransitionSystem::trans() const
{
    std::vector< Formula > parts;
    for ( std::size_t i = 0; i < state_vars.size(); ++i )
        parts.push_back( eq( next_term( i ), next[ i ] ) );
    return conj( parts );
}

Formula TransitionSystem::guard_cover() const
{
    std::vector< Formula > guards;
    for ( const auto& u : updates )
        guards.push_back( u.guard );
    return disj( guards );
}

Formula TransitionSystem::prime( const Formula& f ) const
{
    const std::size_t s = state_vars.size();
    return substitute( f, [ & ]( const TermNode& v ) -> Term {
        if ( v.value >= s )
            throw TypeError( "prime: formula mentions a non-state variable '" + v.name + "'" );
        return next_term( v.value );
    } );
}

std::size_t TransitionSystem::state_bits() const
{
    std::size_t bits = 0;
    for ( const auto& v : state_vars )
        bits += v.width;
    return bits;
}

bool TransitionSystem::satisfies_init( const State& s ) const
{
    if ( s.size() != state_vars.size() )
        return false;
    for ( std::size_t i = 0; i < s.size(); ++i )
        if ( init_values[ i ] && s[ i ] != *init_values[ i ] )
            return false;
    return true;
}

bool TransitionSystem::is_bad( const State& s ) const { return evaluate( bad, s ) == 1; }

State TransitionSystem::step( const State& s, const std::vector< std::uint64_t >& in ) const
{
    std::vector< std::uint64_t > env( s );
    env.insert( env.end(), in.begin(), in.end() );
    State out( state_vars.size() );
    for ( std::size_t i = 0; i < out.size(); ++i )
        out[ i ] = evaluate( next[ i ], env );
    return out;
}

bool TransitionSystem::check_step( const State& s, const std::vector< std::uint64_t >& in, const State& t ) const
{
    return in.size() == inputs.size() && step( s, in ) == t;
}

std::optional< std::string > TransitionSystem::validate_trace( const Trace& t, bool require_bad ) const
{
    if ( t.states.empty() )
        return "empty trace";
    if ( t.inputs.size() + 1 != t.states.size() )
        return "trace has " + std::to_string( t.states.size() ) + " states but " + std::to_string( t.inputs.size() ) +
               " input vectors";
    for ( std::size_t j = 0; j < t.states.size(); ++j )
    {
        const auto& s = t.states[ j ];
        if ( s.size() != state_vars.size() )
            return "state " + std::to_string( j ) + " has the wrong arity";
        for ( std::size_t i = 0; i < s.size(); ++i )
            if ( ( s[ i ] & ~width_mask( state_vars[ i ].width ) ) != 0 )
                return "state " + std::to_string( j ) + " value of '" + state_vars[ i ].name + "' exceeds its width";
    }
    if ( !satisfies_init( t.states.front() ) )
        return "first state violates Init";
    for ( std::size_t j = 0; j + 1 < t.states.size(); ++j )
        if ( !check_step( t.states[ j ], t.inputs[ j ], t.states[ j + 1 ] ) )
            return "step " + std::to_string( j ) + " is not a transition";
    if ( require_bad && !is_bad( t.states.back() ) )
        return "last state is not bad";
    return std::nullopt;
}

std::uint64_t TransitionSystem::pc_code( CodeKind kind, ir::Label label ) const
{
    for ( const auto& c : pc_codes )
        if ( c.kind == kind && ( kind == CodeKind::Bottom || c.label == label ) )
            return c.code;
    throw std::out_of_range( "no pc code point for " + ir::label_name( label ) );
}

std::optional< CodePoint > TransitionSystem::decode_pc( std::uint64_t code ) const
{
    for ( const auto& c : pc_codes )
        if ( c.code == code )
            return c;
    return std::nullopt;
}

std::uint64_t TransitionSystem::bottom_code() const { return pc_code( CodeKind::Bottom, 0 ); }

std::string TransitionSystem::describe_state( const State& s ) const
{
    std::ostringstream os;
    for ( std::size_t i = 0; i < state_vars.size() && i < s.size(); ++i )
    {
        if ( i > 0 )
            os << " ";
        os << state_vars[ i ].name << "=";
        if ( pc_var && i == *pc_var )
        {
            auto c = decode_pc( s[ i ] );
            if ( !c )
                os << "?" << s[ i ];
            else if ( c->kind == CodeKind::Instruction || c->kind == CodeKind::Halt )
                os << ir::label_name( c->label );
            else if ( c->kind == CodeKind::Assertion )
                os << "a_" << ir::label_name( c->label );
            else
                os << "bot";
        }
        else
            os << s[ i ];
    }
    return os.str();
}

std::set< std::string > active_fences( const TransitionSystem& ts )
{
    std::set< std::string > out;
    for ( const auto& [ id, v ] : ts.fence_vars )
        if ( ts.init_values[ v ] == std::optional< std::uint64_t >{ 1 } )
            out.insert( id );
    return out;
}

TransitionSystem add_fence( const TransitionSystem& ts, const std::string& site_id )
{
    auto it = ts.fence_vars.find( site_id );
    if ( it == ts.fence_vars.end() )
        throw std::invalid_argument( "unknown fence site '" + site_id + "'" );
    if ( ts.init_values[ it->second ] != std::optional< std::uint64_t >{ 0 } )
        throw AlreadyActiveError( "fence '" + site_id + "' is already active" );
    TransitionSystem out = ts;
    out.init_values[ it->second ] = 1;
    return out;
}

// ------------------------------------------------------------ cone of influence

State Reduction::project( const State& full ) const
{
    State out;
    out.reserve( state_map.size() );
    for ( std::size_t i : state_map )
        out.push_back( full[ i ] );
    return out;
}

Trace Reduction::lift( const TransitionSystem& original, const Trace& t ) const
{
    Trace out;
    if ( t.states.empty() )
        return out;
    State s( original.num_state(), 0 );
    for ( std::size_t i = 0; i < s.size(); ++i )
        if ( original.init_values[ i ] )
            s[ i ] = *original.init_values[ i ];
    for ( std::size_t i = 0; i < state_map.size(); ++i )
        s[ state_map[ i ] ] = t.states[ 0 ][ i ];
    out.states.push_back( s );
    for ( std::size_t j = 0; j < t.inputs.size(); ++j )
    {
        std::vector< std::uint64_t > in( original.num_inputs(), 0 );
        for ( std::size_t k = 0; k < input_map.size(); ++k )
            in[ input_map[ k ] ] = t.inputs[ j ][ k ];
        s = original.step( s, in );
        if ( project( s ) != t.states[ j + 1 ] )
            throw std::logic_error( "cone of influence: lifted trace diverges at step " + std::to_string( j ) );
        out.inputs.push_back( std::move( in ) );
        out.states.push_back( s );
    }
    return out;
}

Formula Reduction::lift_formula( const TransitionSystem& original, const Formula& f ) const
{
    return substitute( f, [ & ]( const TermNode& v ) -> Term { return original.state_term( state_map.at( v.value ) ); } );
}

Reduction cone_of_influence( const TransitionSystem& ts )
{
    const std::size_t s = ts.num_state();
    std::vector< bool > keep( s, false );
    std::vector< bool > keep_input( ts.num_inputs(), false );
    std::vector< std::size_t > work;
    auto mark = [ & ]( const Term& t ) {
        for ( std::size_t v : variables_of( t ) )
        {
            if ( v < s )
            {
                if ( !keep[ v ] )
                {
                    keep[ v ] = true;
                    work.push_back( v );
                }
            }
            else if ( v < s + ts.num_inputs() )
                keep_input[ v - s ] = true;
        }
    };
    mark( ts.bad );
    if ( ts.pc_var && !keep[ *ts.pc_var ] )
    {
        keep[ *ts.pc_var ] = true;
        work.push_back( *ts.pc_var );
    }
    if ( ts.spec_var && !keep[ *ts.spec_var ] )
    {
        keep[ *ts.spec_var ] = true;
        work.push_back( *ts.spec_var );
    }
    while ( !work.empty() )
    {
        const std::size_t v = work.back();
        work.pop_back();
        mark( ts.next[ v ] );
    }

    Reduction r;
    std::vector< std::size_t > state_pos( s, SIZE_MAX );
    std::vector< std::size_t > input_pos( ts.num_inputs(), SIZE_MAX );
    auto& red = r.reduced;
    red.name = ts.name;
    for ( std::size_t i = 0; i < s; ++i )
        if ( keep[ i ] )
        {
            state_pos[ i ] = r.state_map.size();
            r.state_map.push_back( i );
            red.state_vars.push_back( ts.state_vars[ i ] );
            red.init_values.push_back( ts.init_values[ i ] );
        }
    for ( std::size_t j = 0; j < ts.num_inputs(); ++j )
        if ( keep_input[ j ] )
        {
            input_pos[ j ] = r.input_map.size();
            r.input_map.push_back( j );
            red.inputs.push_back( ts.inputs[ j ] );
        }
    red.declare_terms();
    auto rename = [ & ]( const TermNode& v ) -> Term {
        if ( v.value < s )
            return red.state_term( state_pos.at( v.value ) );
        return red.input_term( input_pos.at( v.value - s ) );
    };
    for ( std::size_t i : r.state_map )
        red.next.push_back( substitute( ts.next[ i ], rename ) );
    red.bad = substitute( ts.bad, rename );

    red.pc_codes = ts.pc_codes;
    if ( ts.pc_var )
        red.pc_var = state_pos[ *ts.pc_var ];
    if ( ts.spec_var )
        red.spec_var = state_pos[ *ts.spec_var ];
    red.fence_sites = ts.fence_sites;
    for ( const auto& [ id, v ] : ts.fence_vars )
        if ( keep[ v ] )
            red.fence_vars.emplace( id, state_pos[ v ] );
    red.mode = ts.mode;
    red.vinst = ts.vinst;
    return r;
}

} // namespace specfence::encode
