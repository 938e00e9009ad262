#include "specfence/pdr/engine.hpp"

#include "specfence/logic/check.hpp"

#include <algorithm>
#include <sstream>

namespace specfence::pdr
{

using logic::AigLit;
using logic::BitLit;
namespace sat = logic::sat;

namespace
{

constexpr std::size_t none = SIZE_MAX;
// Retired temporary clauses tolerated before a solver is rebuilt.
constexpr std::size_t max_retired = 4000;

} // namespace

std::string to_string( Rule r )
{
    switch ( r )
    {
    case Rule::Safe: return "Safe";
    case Rule::Cex: return "Cex";
    case Rule::Unfold: return "Unfold";
    case Rule::Candidate: return "Candidate";
    case Rule::Predecessor: return "Predecessor";
    case Rule::NewLemma: return "NewLemma";
    case Rule::ReQueue: return "ReQueue";
    case Rule::Push: return "Push";
    case Rule::MaxIndSubset: return "MaxIndSubset";
    case Rule::Successor: return "Successor";
    case Rule::ResetQ: return "ResetQ";
    case Rule::ResetReach: return "ResetReach";
    }
    return "?";
}

// One SAT solver holding the Tseitin encoding of the transition relation,
// with activation literals for the frame levels.
class Engine::Context
{
public:
    sat::Solver solver;
    logic::CnfEmitter cnf;
    std::vector< sat::Var > levels;
    sat::Var infinity;
    std::size_t retired = 0;

    Context( const Engine& e ) : cnf{ e._aig, solver }
    {
        solver.set_seed( e._options.seed );
        for ( AigLit l : e._cur )
            cnf.lit( l );
        for ( AigLit l : e._inp )
            cnf.lit( l );
        for ( AigLit l : e._nxt )
            cnf.lit( l );
        cnf.lit( e._bad );
        infinity = solver.new_var();
    }

    sat::Lit act( unsigned level )
    {
        while ( levels.size() <= level )
            levels.push_back( solver.new_var() );
        return sat::Lit::make( levels[ level ] );
    }

    sat::Lit bit( AigLit l, bool value ) { return value ? cnf.lit( l ) : ~cnf.lit( l ); }

    void add_lemma( const Engine& e, const Cube& c, sat::Lit activation )
    {
        std::vector< sat::Lit > clause{ ~activation };
        for ( const auto& l : c.lits() )
            clause.push_back( ~bit( e._cur[ l.bit ], l.value ) );
        solver.add_clause( clause );
    }

    // A fresh literal enabling a clause until it is retired.
    sat::Lit temporary( std::vector< sat::Lit > clause )
    {
        const sat::Lit t = sat::Lit::make( solver.new_var() );
        clause.insert( clause.begin(), ~t );
        solver.add_clause( clause );
        return t;
    }

    void retire( sat::Lit t )
    {
        solver.add_clause( { ~t } );
        ++retired;
    }
};

Engine::Engine( const TransitionSystem& ts, EngineOptions options ) : _full{ ts }, _options{ std::move( options ) }
{
    build_model();
    rebuild_solvers();
    _frames.resize( 1 );
    auto a = frame_assumptions( *_main, 0 );
    a.push_back( _main->cnf.lit( _bad ) );
    if ( query( *_main, a ) == sat::Result::Sat )
        throw RequireViolated( "pdr: Init intersects Bad" );
}

Engine::~Engine() = default;

void Engine::build_model()
{
    _red = encode::cone_of_influence( _full );
    const auto& ts = _red.reduced;
    _layout = logic::layout_of( ts );
    std::vector< unsigned > input_widths;
    for ( const auto& in : ts.inputs )
        input_widths.push_back( in.width );
    _input_layout = logic::BitLayout( input_widths );

    _aig = logic::Aig();
    _cur.clear();
    _inp.clear();
    _nxt.clear();
    for ( std::size_t b = 0; b < _layout.num_bits(); ++b )
        _cur.push_back( _aig.make_input() );
    for ( std::size_t b = 0; b < _input_layout.num_bits(); ++b )
        _inp.push_back( _aig.make_input() );
    const std::size_t s = ts.num_state();
    logic::BitBlaster blaster( _aig, [ & ]( const logic::TermNode& v ) {
        logic::BitVec bits;
        if ( v.value < s )
            for ( unsigned k = 0; k < v.width; ++k )
                bits.push_back( _cur[ _layout.offset( v.value ) + k ] );
        else if ( v.value < s + ts.num_inputs() )
            for ( unsigned k = 0; k < v.width; ++k )
                bits.push_back( _inp[ _input_layout.offset( v.value - s ) + k ] );
        else
            throw InternalError( "pdr: next-state function mentions a primed variable" );
        return bits;
    } );
    for ( std::size_t i = 0; i < s; ++i )
    {
        const auto bits = blaster.blast( ts.next[ i ] );
        _nxt.insert( _nxt.end(), bits.begin(), bits.end() );
    }
    _bad = blaster.blast_bool( ts.bad );
}

void Engine::rebuild_solvers()
{
    _main = std::make_unique< Context >( *this );
    _lift = std::make_unique< Context >( *this );
    for ( std::size_t l = 1; l < _frames.size(); ++l )
        for ( const auto& c : _frames[ l ] )
            _main->add_lemma( *this, c, _main->act( static_cast< unsigned >( l ) ) );
    for ( const auto& c : _infinity )
        _main->add_lemma( *this, c, sat::Lit::make( _main->infinity ) );
}

void Engine::emit( Rule r, unsigned level, std::size_t size ) const
{
    if ( _options.log )
        _options.log( RuleEvent{ r, level, size } );
}

std::vector< sat::Lit > Engine::frame_assumptions( Context& ctx, unsigned j ) const
{
    std::vector< sat::Lit > a;
    if ( j == 0 )
    {
        const auto& init = _red.reduced.init_values;
        for ( std::uint32_t b = 0; b < _layout.num_bits(); ++b )
            if ( const auto& v = init[ _layout.var_of( b ) ] )
                a.push_back( ctx.bit( _cur[ b ], ( ( *v >> _layout.position( b ) ) & 1 ) != 0 ) );
        return a;
    }
    for ( unsigned l = j; l <= _n; ++l )
        a.push_back( ctx.act( l ) );
    a.push_back( sat::Lit::make( ctx.infinity ) );
    return a;
}

sat::Result Engine::query( Context& ctx, std::vector< sat::Lit > assumptions )
{
    ++_stats.queries;
    ctx.solver.set_conflict_budget( _options.conflict_budget );
    const auto r = ctx.solver.solve( assumptions );
    if ( r == sat::Result::Unknown )
        throw logic::ResourceError( "pdr: conflict budget exhausted" );
    return r;
}

bool Engine::meets_init( const Cube& c ) const { return c.intersects( _red.reduced.init_values, _layout ); }

std::optional< std::size_t > Engine::meets_reach( const Cube& c ) const
{
    for ( std::size_t r = 0; r < _reach.size(); ++r )
        if ( c.holds( _reach[ r ].state, _layout ) )
            return r;
    return std::nullopt;
}

Cube Engine::separate( Cube c, const Cube& from ) const
{
    auto add_first = [ & ]( const std::function< bool( const BitLit& ) >& wanted ) {
        for ( const auto& l : from.lits() )
            if ( !c.contains( l ) && wanted( l ) )
            {
                auto lits = c.lits();
                lits.push_back( l );
                c = Cube( std::move( lits ) );
                return;
            }
        throw InternalError( "pdr: cube cannot be separated from Init and Reach" );
    };
    const auto& init = _red.reduced.init_values;
    while ( meets_init( c ) )
        add_first( [ & ]( const BitLit& l ) {
            const auto& v = init[ _layout.var_of( l.bit ) ];
            return v && ( ( ( *v >> _layout.position( l.bit ) ) & 1 ) != 0 ) != l.value;
        } );
    while ( auto r = meets_reach( c ) )
    {
        const State& s = _reach[ *r ].state;
        add_first( [ & ]( const BitLit& l ) { return _layout.bit_value( s, l.bit ) != l.value; } );
    }
    return c;
}

std::optional< Cube > Engine::relative_inductive( const Cube& c, unsigned j, bool strengthen )
{
    Context& ctx = *_main;
    auto a = frame_assumptions( ctx, j );
    std::optional< sat::Lit > temp;
    if ( strengthen )
    {
        std::vector< sat::Lit > clause;
        for ( const auto& l : c.lits() )
            clause.push_back( ~ctx.bit( _cur[ l.bit ], l.value ) );
        temp = ctx.temporary( std::move( clause ) );
        a.push_back( *temp );
    }
    const std::size_t first_cube = a.size();
    for ( const auto& l : c.lits() )
        a.push_back( ctx.bit( _nxt[ l.bit ], l.value ) );
    const auto r = query( ctx, a );
    std::optional< Cube > out;
    if ( r == sat::Result::Unsat )
    {
        const auto& failed = ctx.solver.failed_assumptions();
        std::vector< BitLit > core;
        for ( std::size_t k = 0; k < c.size(); ++k )
            if ( std::binary_search( failed.begin(), failed.end(), a[ first_cube + k ] ) )
                core.push_back( c.lits()[ k ] );
        out = core.empty() ? c : Cube( std::move( core ) );
    }
    if ( temp )
        ctx.retire( *temp );
    return out;
}

Cube Engine::generalize( const Cube& c, unsigned j )
{
    const Cube g = logic::drop_literals( c, [ & ]( const Cube& candidate ) -> std::optional< Cube > {
        if ( meets_init( candidate ) || meets_reach( candidate ) )
            return std::nullopt;
        auto core = relative_inductive( candidate, j, true );
        if ( !core )
            return std::nullopt;
        return separate( *core, candidate );
    } );
    if ( _options.check_invariants )
    {
        if ( meets_init( g ) || meets_reach( g ) || !g.subsumes( c ) || !relative_inductive( g, j, true ) )
            throw InternalError( "pdr: generalized cube failed re-verification" );
    }
    return g;
}

Cube Engine::lift_predecessor( const State& s, const std::vector< std::uint64_t >& in, const Cube* target )
{
    Context& ctx = *_lift;
    std::vector< sat::Lit > a;
    std::optional< sat::Lit > temp;
    if ( target )
    {
        std::vector< sat::Lit > clause;
        for ( const auto& l : target->lits() )
            clause.push_back( ~ctx.bit( _nxt[ l.bit ], l.value ) );
        temp = ctx.temporary( std::move( clause ) );
        a.push_back( *temp );
    }
    else
        a.push_back( ~ctx.cnf.lit( _bad ) );
    const std::size_t first_state = a.size();
    for ( std::uint32_t b = 0; b < _layout.num_bits(); ++b )
        a.push_back( ctx.bit( _cur[ b ], _layout.bit_value( s, b ) ) );
    for ( std::uint32_t b = 0; b < _input_layout.num_bits(); ++b )
        a.push_back( ctx.bit( _inp[ b ], _input_layout.bit_value( in, b ) ) );
    const auto r = query( ctx, a );
    if ( r != sat::Result::Unsat )
        throw InternalError( "pdr: concrete predecessor does not reach its successor cube" );
    const auto& failed = ctx.solver.failed_assumptions();
    std::vector< BitLit > lits;
    for ( std::uint32_t b = 0; b < _layout.num_bits(); ++b )
        if ( std::binary_search( failed.begin(), failed.end(), a[ first_state + b ] ) )
            lits.push_back( { b, _layout.bit_value( s, b ) } );
    if ( temp )
        ctx.retire( *temp );
    return Cube( std::move( lits ) );
}

void Engine::add_lemma( const Cube& c, unsigned level )
{
    for ( unsigned l = 1; l <= level && l < _frames.size(); ++l )
        std::erase_if( _frames[ l ], [ & ]( const Cube& d ) { return c.subsumes( d ); } );
    if ( _frames.size() <= level )
        _frames.resize( level + 1 );
    _frames[ level ].push_back( c );
    _main->add_lemma( *this, c, _main->act( level ) );
    ++_stats.lemmas;
}

void Engine::add_infinity( const Cube& c )
{
    _infinity.push_back( c );
    _main->add_lemma( *this, c, sat::Lit::make( _main->infinity ) );
    _infinity_changed = true;
}

void Engine::push_lemmas()
{
    for ( unsigned l = 1; l < _n; ++l )
    {
        const auto cubes = _frames[ l ];
        for ( const auto& c : cubes )
        {
            auto it = std::find( _frames[ l ].begin(), _frames[ l ].end(), c );
            if ( it == _frames[ l ].end() || meets_reach( c ) )
                continue;
            if ( relative_inductive( c, l, false ) )
            {
                _frames[ l ].erase( std::find( _frames[ l ].begin(), _frames[ l ].end(), c ) );
                add_lemma( c, l + 1 );
                emit( Rule::Push, l + 1, c.size() );
            }
        }
        if ( _frames[ l ].empty() )
        {
            // F_l = F_{l+1} and F_l & Tr -> F_{l+1}': the upper frames are inductive.
            std::size_t moved = 0;
            for ( unsigned k = l + 1; k < _frames.size(); ++k )
            {
                for ( const auto& c : _frames[ k ] )
                    add_infinity( c );
                moved += _frames[ k ].size();
                _frames[ k ].clear();
            }
            _infinity_changed = true;
            emit( Rule::MaxIndSubset, l + 1, moved );
            break;
        }
    }
}

State Engine::model_state( Context& ctx ) const
{
    State s( _red.reduced.num_state(), 0 );
    for ( std::uint32_t b = 0; b < _layout.num_bits(); ++b )
        if ( ctx.solver.model_true( ctx.cnf.lit( _cur[ b ] ) ) )
            s[ _layout.var_of( b ) ] |= std::uint64_t{ 1 } << _layout.position( b );
    return s;
}

std::vector< std::uint64_t > Engine::model_inputs( Context& ctx ) const
{
    std::vector< std::uint64_t > in( _red.reduced.num_inputs(), 0 );
    for ( std::uint32_t b = 0; b < _input_layout.num_bits(); ++b )
        if ( ctx.solver.model_true( ctx.cnf.lit( _inp[ b ] ) ) )
            in[ _input_layout.var_of( b ) ] |= std::uint64_t{ 1 } << _input_layout.position( b );
    return in;
}

void Engine::add_reach( State s, std::size_t parent, std::vector< std::uint64_t > in )
{
    _reach.push_back( { std::move( s ), parent, std::move( in ) } );
    if ( _options.check_invariants )
        verify_reach( _reach.size() - 1 );
}

void Engine::verify_reach( std::size_t id ) const
{
    const auto& ts = _red.reduced;
    for ( std::size_t k = id; k != none; k = _reach[ k ].parent )
    {
        const auto& e = _reach[ k ];
        if ( e.parent == none )
        {
            if ( !ts.satisfies_init( e.state ) )
                throw InternalError( "pdr: Reach root is not an Init state" );
        }
        else if ( !ts.check_step( _reach[ e.parent ].state, e.inputs, e.state ) )
            throw InternalError( "pdr: Reach entry does not replay" );
    }
}

StepResult Engine::check_safe()
{
    _infinity_changed = false;
    if ( query( *_main, { sat::Lit::make( _main->infinity ), _main->cnf.lit( _bad ) } ) == sat::Result::Unsat )
    {
        emit( Rule::Safe, _n, _infinity.size() );
        _status = StepResult::Safe;
    }
    return _status;
}

StepResult Engine::handle_obligation()
{
    auto qit = _queue.begin();
    const std::size_t id = qit->second.front();
    const Cube cube = _obligations[ id ].cube;
    const unsigned j = _obligations[ id ].level;

    if ( meets_init( cube ) )
    {
        _leak = Leak{ id, none };
        emit( Rule::Cex, j, cube.size() );
        return _status = StepResult::LeakFound;
    }
    if ( auto r = meets_reach( cube ) )
    {
        _leak = Leak{ id, *r };
        emit( Rule::Cex, j, cube.size() );
        return _status = StepResult::LeakFound;
    }
    if ( j == 0 )
        throw InternalError( "pdr: obligation at level 0 misses Init" );

    Context& ctx = *_main;
    auto a = frame_assumptions( ctx, j - 1 );
    const std::size_t first_cube = a.size();
    for ( const auto& l : cube.lits() )
        a.push_back( ctx.bit( _nxt[ l.bit ], l.value ) );
    if ( query( ctx, a ) == sat::Result::Sat )
    {
        const State s = model_state( ctx );
        const auto in = model_inputs( ctx );
        if ( j == 1 )
        {
            const auto& ts = _red.reduced;
            if ( !ts.satisfies_init( s ) )
                throw InternalError( "pdr: model of F0 violates Init" );
            const State t = ts.step( s, in );
            if ( !cube.holds( t, _layout ) )
                throw InternalError( "pdr: successor misses the obligation cube" );
            add_reach( s, none, {} );
            add_reach( t, _reach.size() - 1, in );
            emit( Rule::Successor, 0, cube.size() );
            return StepResult::Continue;
        }
        Cube pre = lift_predecessor( s, in, &cube );
        ++_stats.obligations;
        _obligations.push_back( { std::move( pre ), j - 1, id, in } );
        _queue[ j - 1 ].push_back( _obligations.size() - 1 );
        emit( Rule::Predecessor, j - 1, _obligations.back().cube.size() );
        return StepResult::Continue;
    }

    const auto& failed = ctx.solver.failed_assumptions();
    std::vector< BitLit > core;
    for ( std::size_t k = 0; k < cube.size(); ++k )
        if ( std::binary_search( failed.begin(), failed.end(), a[ first_cube + k ] ) )
            core.push_back( cube.lits()[ k ] );
    Cube g = separate( core.empty() ? cube : Cube( std::move( core ) ), cube );
    g = generalize( g, j - 1 );
    unsigned level = j;
    while ( level < _n && relative_inductive( g, level, true ) )
        ++level;
    add_lemma( g, level );
    emit( Rule::NewLemma, level, g.size() );

    qit->second.pop_front();
    if ( qit->second.empty() )
        _queue.erase( qit );
    if ( level < _n )
    {
        _obligations[ id ].level = level + 1;
        _queue[ level + 1 ].push_back( id );
        emit( Rule::ReQueue, level + 1, cube.size() );
    }
    return StepResult::Continue;
}

StepResult Engine::step()
{
    if ( _status != StepResult::Continue )
        return _status;
    ++_stats.steps;
    if ( _main->retired > max_retired || _lift->retired > max_retired )
        rebuild_solvers();
    if ( _infinity_changed && check_safe() == StepResult::Safe )
        return _status;
    if ( !_queue.empty() )
        handle_obligation();
    else
    {
        auto a = frame_assumptions( *_main, _n );
        a.push_back( _main->cnf.lit( _bad ) );
        if ( query( *_main, a ) == sat::Result::Sat )
        {
            const State s = model_state( *_main );
            Cube c = lift_predecessor( s, model_inputs( *_main ), nullptr );
            ++_stats.obligations;
            _obligations.push_back( { std::move( c ), _n, none, {} } );
            _queue[ _n ].push_back( _obligations.size() - 1 );
            emit( Rule::Candidate, _n, _obligations.back().cube.size() );
        }
        else
        {
            ++_n;
            _frames.resize( std::max< std::size_t >( _frames.size(), _n + 1 ) );
            emit( Rule::Unfold, _n, 0 );
            push_lemmas();
        }
    }
    after_step();
    return _status;
}

StepResult Engine::run()
{
    while ( step() == StepResult::Continue )
    {
    }
    return _status;
}

void Engine::after_step()
{
    if ( !_options.check_invariants )
        return;
    if ( auto err = check_trace_properties() )
        throw InternalError( "pdr: " + *err );
}

std::size_t Engine::queue_size() const
{
    std::size_t n = 0;
    for ( const auto& [ _, q ] : _queue )
        n += q.size();
    return n;
}

FrameView Engine::frames() const
{
    FrameView v;
    v.n = _n;
    v.frames = _frames;
    v.frames.resize( _n + 1 );
    v.infinity = _infinity;
    return v;
}

std::optional< std::string > Engine::check_trace_properties() const
{
    Context ctx( *this );
    for ( std::size_t l = 1; l < _frames.size(); ++l )
        for ( const auto& c : _frames[ l ] )
            ctx.add_lemma( *this, c, ctx.act( static_cast< unsigned >( l ) ) );
    for ( const auto& c : _infinity )
        ctx.add_lemma( *this, c, sat::Lit::make( ctx.infinity ) );

    for ( std::size_t l = _n + 1; l < _frames.size(); ++l )
        if ( !_frames[ l ].empty() )
            return "lemma above the top level " + std::to_string( _n );
    auto lemmas_from = [ & ]( unsigned j ) {
        std::vector< Cube > out( _infinity );
        for ( std::size_t l = j; l < _frames.size(); ++l )
            out.insert( out.end(), _frames[ l ].begin(), _frames[ l ].end() );
        return out;
    };
    // F0 -> F1: Init excludes every lemma.
    for ( const auto& c : lemmas_from( 1 ) )
        if ( meets_init( c ) )
            return "lemma " + render( c ) + " excludes an Init state";
    for ( unsigned j = 0; j < _n; ++j )
    {
        auto a = frame_assumptions( ctx, j );
        a.push_back( ctx.cnf.lit( _bad ) );
        if ( ctx.solver.solve( a ) != sat::Result::Unsat )
            return "F" + std::to_string( j ) + " intersects Bad";
        for ( const auto& c : lemmas_from( j + 1 ) )
        {
            auto b = frame_assumptions( ctx, j );
            for ( const auto& l : c.lits() )
                b.push_back( ctx.bit( _nxt[ l.bit ], l.value ) );
            if ( ctx.solver.solve( b ) != sat::Result::Unsat )
                return "F" + std::to_string( j ) + " & Tr does not imply lemma " + render( c ) + " at level " +
                       std::to_string( j + 1 );
        }
    }
    return std::nullopt;
}

void Engine::reset_queue()
{
    _queue.clear();
    _obligations.clear();
    _leak.reset();
    if ( _status == StepResult::LeakFound )
        _status = StepResult::Continue;
    emit( Rule::ResetQ, _n, 0 );
}

void Engine::reset_reach()
{
    _reach.clear();
    _leak.reset();
    if ( _status == StepResult::LeakFound )
        _status = StepResult::Continue;
    emit( Rule::ResetReach, 0, 0 );
}

RevalidationStats Engine::revalidate( const TransitionSystem& ts )
{
    const auto red = encode::cone_of_influence( ts );
    if ( red.state_map != _red.state_map || red.input_map != _red.input_map )
        throw InternalError( "pdr: revalidation target has a different cone of influence" );
    for ( std::size_t i = 0; i < red.reduced.num_state(); ++i )
        if ( red.reduced.next[ i ] != _red.reduced.next[ i ] &&
             logic::to_string( red.reduced.next[ i ] ) != logic::to_string( _red.reduced.next[ i ] ) )
            throw InternalError( "pdr: revalidation target has a different transition relation" );
    _full = ts;
    _red = red;

    std::vector< Cube > old_infinity = std::move( _infinity );
    std::vector< std::pair< Cube, unsigned > > leveled;
    for ( unsigned l = 1; l < _frames.size(); ++l )
        for ( auto& c : _frames[ l ] )
            leveled.emplace_back( std::move( c ), std::min( l, _n ) );
    const std::size_t total = old_infinity.size() + leveled.size();
    _frames.assign( _n + 1, {} );
    _infinity.clear();
    _queue.clear();
    _obligations.clear();
    _reach.clear();
    _leak.reset();
    _status = StepResult::Continue;
    rebuild_solvers();

    {
        auto a = frame_assumptions( *_main, 0 );
        a.push_back( _main->cnf.lit( _bad ) );
        if ( query( *_main, a ) == sat::Result::Sat )
            throw RequireViolated( "pdr: Init intersects Bad" );
    }

    // The largest inductive subset of the old invariant that the new Init
    // satisfies stays in F-infinity.
    std::vector< Cube > inv;
    for ( auto& c : old_infinity )
        if ( !meets_init( c ) )
            inv.push_back( std::move( c ) );
    for ( bool changed = true; changed; )
    {
        changed = false;
        Context scratch( *this );
        const auto act = sat::Lit::make( scratch.infinity );
        for ( const auto& c : inv )
            scratch.add_lemma( *this, c, act );
        std::vector< Cube > keep;
        for ( auto& c : inv )
        {
            std::vector< sat::Lit > a{ act };
            for ( const auto& l : c.lits() )
                a.push_back( scratch.bit( _nxt[ l.bit ], l.value ) );
            if ( query( scratch, a ) == sat::Result::Unsat )
                keep.push_back( std::move( c ) );
            else
            {
                leveled.emplace_back( c, _n );
                changed = true;
            }
        }
        inv = std::move( keep );
    }
    for ( const auto& c : inv )
        add_infinity( c );

    // Level-by-level re-admission: a lemma reaches level j only if F_{j-1}
    // of the filtered frames implies it after one step.
    std::vector< std::pair< Cube, unsigned > > alive;
    for ( auto& [ c, t ] : leveled )
        if ( t >= 1 && !meets_init( c ) )
            alive.emplace_back( std::move( c ), t );
    std::vector< std::pair< Cube, unsigned > > settled;
    for ( unsigned j = 1; j <= _n && !alive.empty(); ++j )
    {
        std::vector< std::pair< Cube, unsigned > > passed;
        for ( auto& [ c, t ] : alive )
        {
            auto a = frame_assumptions( *_main, j - 1 );
            for ( const auto& l : c.lits() )
                a.push_back( _main->bit( _nxt[ l.bit ], l.value ) );
            if ( query( *_main, a ) == sat::Result::Unsat )
                passed.emplace_back( std::move( c ), t );
            else if ( j > 1 )
                settled.emplace_back( std::move( c ), j - 1 );
        }
        alive.clear();
        for ( auto& [ c, t ] : passed )
        {
            _main->add_lemma( *this, c, _main->act( j ) );
            if ( t > j )
                alive.emplace_back( std::move( c ), t );
            else
                settled.emplace_back( std::move( c ), j );
        }
    }
    for ( auto& [ c, l ] : settled )
        _frames[ l ].push_back( std::move( c ) );

    RevalidationStats out;
    out.kept = inv.size() + settled.size();
    out.dropped = total - out.kept;
    rebuild_solvers();

    // Lower N to the first frame that no longer excludes Bad.
    for ( unsigned j = 1; j <= _n; ++j )
    {
        auto a = frame_assumptions( *_main, j );
        a.push_back( _main->cnf.lit( _bad ) );
        if ( query( *_main, a ) == sat::Result::Sat )
        {
            for ( unsigned l = j + 1; l < _frames.size(); ++l )
            {
                for ( auto& c : _frames[ l ] )
                    _frames[ j ].push_back( std::move( c ) );
                _frames[ l ].clear();
            }
            _n = j;
            _frames.resize( _n + 1 );
            rebuild_solvers();
            break;
        }
    }
    _infinity_changed = true;
    emit( Rule::ResetQ, _n, 0 );
    emit( Rule::ResetReach, 0, 0 );
    after_step();
    return out;
}

Trace Engine::reconstruct_execution() const
{
    if ( !_leak )
        throw InternalError( "pdr: no leak to reconstruct" );
    const auto& ts = _red.reduced;
    Trace t;
    if ( _leak->reach == none )
    {
        State s( ts.num_state(), 0 );
        for ( std::size_t i = 0; i < s.size(); ++i )
            if ( ts.init_values[ i ] )
                s[ i ] = *ts.init_values[ i ];
        for ( const auto& l : _obligations[ _leak->obligation ].cube.lits() )
            if ( !ts.init_values[ _layout.var_of( l.bit ) ] && l.value )
                s[ _layout.var_of( l.bit ) ] |= std::uint64_t{ 1 } << _layout.position( l.bit );
        t.states.push_back( s );
    }
    else
    {
        std::vector< std::size_t > chain;
        for ( std::size_t k = _leak->reach; k != none; k = _reach[ k ].parent )
            chain.push_back( k );
        std::reverse( chain.begin(), chain.end() );
        for ( std::size_t c = 0; c < chain.size(); ++c )
        {
            t.states.push_back( _reach[ chain[ c ] ].state );
            if ( c > 0 )
                t.inputs.push_back( _reach[ chain[ c ] ].inputs );
        }
    }
    if ( !_obligations[ _leak->obligation ].cube.holds( t.states.back(), _layout ) )
        throw InternalError( "pdr: leak witness is not in the obligation cube" );
    for ( std::size_t k = _leak->obligation; _obligations[ k ].parent != none; k = _obligations[ k ].parent )
    {
        const auto& o = _obligations[ k ];
        State next = ts.step( t.states.back(), o.inputs );
        if ( !_obligations[ o.parent ].cube.holds( next, _layout ) )
            throw InternalError( "pdr: obligation chain does not replay" );
        t.states.push_back( std::move( next ) );
        t.inputs.push_back( o.inputs );
    }
    if ( auto err = ts.validate_trace( t ) )
        throw InternalError( "pdr: reconstructed execution is invalid: " + *err );
    Trace full;
    try
    {
        full = _red.lift( _full, t );
    }
    catch ( const std::logic_error& e )
    {
        throw InternalError( std::string( "pdr: " ) + e.what() );
    }
    if ( auto err = _full.validate_trace( full ) )
        throw InternalError( "pdr: lifted execution is invalid: " + *err );
    return full;
}

logic::Formula Engine::extract_invariant() const
{
    if ( _status != StepResult::Safe )
        throw NotSafeError( "pdr: no invariant before the engine reports Safe" );
    std::vector< logic::Term > vars;
    for ( std::size_t i = 0; i < _red.reduced.num_state(); ++i )
        vars.push_back( _red.reduced.state_term( i ) );
    std::vector< logic::Formula > parts;
    for ( const auto& c : _infinity )
        parts.push_back( logic::lemma_formula( c, _layout, vars ) );
    return _red.lift_formula( _full, logic::conj( parts ) );
}

std::vector< Cube > Engine::invariant_cubes() const
{
    if ( _status != StepResult::Safe )
        throw NotSafeError( "pdr: no invariant before the engine reports Safe" );
    const auto full = logic::layout_of( _full );
    std::vector< Cube > out;
    for ( const auto& c : _infinity )
    {
        std::vector< BitLit > lits;
        for ( const auto& l : c.lits() )
        {
            const std::size_t var = _red.state_map[ _layout.var_of( l.bit ) ];
            lits.push_back( { full.offset( var ) + _layout.position( l.bit ), l.value } );
        }
        out.emplace_back( std::move( lits ) );
    }
    return out;
}

std::string Engine::render( const Cube& c ) const
{
    std::vector< std::string > names;
    for ( const auto& v : _red.reduced.state_vars )
        names.push_back( v.name );
    return logic::render_cube( c, _layout, names );
}

} // namespace specfence::pdr
