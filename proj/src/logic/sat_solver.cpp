#include "specfence/logic/sat_solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace specfence::logic::sat
{

namespace
{

struct Clause
{
    std::vector< Lit > lits;
    double activity = 0;
    bool learnt = false;
    bool removed = false;
};

struct Watcher
{
    Clause* clause;
    Lit blocker;
};

// Max-heap on variable activity.
class VarHeap
{
    std::vector< Var > _heap;
    std::vector< int > _pos;
    const std::vector< double >* _act = nullptr;

    bool less( Var a, Var b ) const { return ( *_act )[ a ] > ( *_act )[ b ] || ( ( *_act )[ a ] == ( *_act )[ b ] && a < b ); }

    void up( int i )
    {
        Var v = _heap[ i ];
        while ( i > 0 )
        {
            int p = ( i - 1 ) / 2;
            if ( !less( v, _heap[ p ] ) )
                break;
            _heap[ i ] = _heap[ p ];
            _pos[ _heap[ i ] ] = i;
            i = p;
        }
        _heap[ i ] = v;
        _pos[ v ] = i;
    }

    void down( int i )
    {
        Var v = _heap[ i ];
        const int n = static_cast< int >( _heap.size() );
        for ( ;; )
        {
            int c = 2 * i + 1;
            if ( c >= n )
                break;
            if ( c + 1 < n && less( _heap[ c + 1 ], _heap[ c ] ) )
                ++c;
            if ( !less( _heap[ c ], v ) )
                break;
            _heap[ i ] = _heap[ c ];
            _pos[ _heap[ i ] ] = i;
            i = c;
        }
        _heap[ i ] = v;
        _pos[ v ] = i;
    }

public:
    void bind( const std::vector< double >* act ) { _act = act; }
    void grow( int n ) { _pos.resize( n, -1 ); }
    bool contains( Var v ) const { return _pos[ v ] >= 0; }
    bool empty() const { return _heap.empty(); }

    void insert( Var v )
    {
        if ( contains( v ) )
            return;
        _pos[ v ] = static_cast< int >( _heap.size() );
        _heap.push_back( v );
        up( _pos[ v ] );
    }

    void increased( Var v )
    {
        if ( contains( v ) )
            up( _pos[ v ] );
    }

    Var pop()
    {
        Var top = _heap.front();
        _pos[ top ] = -1;
        Var last = _heap.back();
        _heap.pop_back();
        if ( !_heap.empty() )
        {
            _heap[ 0 ] = last;
            _pos[ last ] = 0;
            down( 0 );
        }
        return top;
    }
};

double luby( double y, int x )
{
    int size = 1;
    int seq = 0;
    while ( size < x + 1 )
    {
        ++seq;
        size = 2 * size + 1;
    }
    while ( size - 1 != x )
    {
        size = ( size - 1 ) >> 1;
        --seq;
        x = x % size;
    }
    return std::pow( y, seq );
}

} // namespace

struct Solver::Impl
{
    std::vector< std::unique_ptr< Clause > > clauses;
    std::vector< std::unique_ptr< Clause > > learnts;
    std::vector< std::vector< Watcher > > watches; // indexed by literal
    std::vector< Value > assigns;
    std::vector< int > level;
    std::vector< Clause* > reason;
    std::vector< bool > polarity; // saved phase: true = negative
    std::vector< double > activity;
    std::vector< char > seen;
    std::vector< Lit > trail;
    std::vector< int > trail_lim;
    std::size_t qhead = 0;
    VarHeap order;
    double var_inc = 1.0;
    double var_decay = 0.95;
    double cla_inc = 1.0;
    double cla_decay = 0.999;
    bool ok = true;
    std::vector< Lit > assumptions;
    std::vector< Lit > conflict_core;
    std::vector< Value > model;
    std::uint64_t conflict_budget = 0;
    std::uint64_t rng_state = 0;
    double max_learnts = 0;
    SolverStats stats;

    Impl() { order.bind( &activity ); }

    Value value( Lit l ) const
    {
        Value v = assigns[ l.var() ];
        if ( v == Value::Undef )
            return v;
        return static_cast< Value >( static_cast< int >( v ) ^ static_cast< int >( l.negated() ) );
    }

    int decision_level() const { return static_cast< int >( trail_lim.size() ); }

    Var new_var()
    {
        Var v = static_cast< Var >( assigns.size() );
        assigns.push_back( Value::Undef );
        level.push_back( 0 );
        reason.push_back( nullptr );
        polarity.push_back( true );
        activity.push_back( 0.0 );
        seen.push_back( 0 );
        watches.emplace_back();
        watches.emplace_back();
        order.grow( v + 1 );
        order.insert( v );
        return v;
    }

    void enqueue( Lit l, Clause* from )
    {
        assigns[ l.var() ] = l.negated() ? Value::False : Value::True;
        level[ l.var() ] = decision_level();
        reason[ l.var() ] = from;
        trail.push_back( l );
    }

    void attach( Clause* c )
    {
        watches[ ( ~c->lits[ 0 ] ).index() ].push_back( { c, c->lits[ 1 ] } );
        watches[ ( ~c->lits[ 1 ] ).index() ].push_back( { c, c->lits[ 0 ] } );
    }

    bool add_clause( std::span< const Lit > in )
    {
        if ( !ok )
            return false;
        assert( decision_level() == 0 );
        std::vector< Lit > lits( in.begin(), in.end() );
        for ( Lit l : lits )
            while ( l.var() >= static_cast< Var >( assigns.size() ) )
                new_var();
        std::sort( lits.begin(), lits.end() );
        std::vector< Lit > out;
        Lit prev = undef_lit;
        for ( Lit l : lits )
        {
            if ( value( l ) == Value::True || l == ~prev )
                return true;
            if ( value( l ) != Value::False && l != prev )
            {
                out.push_back( l );
                prev = l;
            }
        }
        if ( out.empty() )
            return ok = false;
        if ( out.size() == 1 )
        {
            enqueue( out[ 0 ], nullptr );
            return ok = ( propagate() == nullptr );
        }
        auto c = std::make_unique< Clause >();
        c->lits = std::move( out );
        attach( c.get() );
        clauses.push_back( std::move( c ) );
        return true;
    }

    Clause* propagate()
    {
        Clause* confl = nullptr;
        while ( qhead < trail.size() )
        {
            Lit p = trail[ qhead++ ];
            ++stats.propagations;
            auto& ws = watches[ p.index() ];
            std::size_t i = 0;
            std::size_t j = 0;
            const Lit false_lit = ~p;
            while ( i < ws.size() )
            {
                Watcher w = ws[ i ];
                if ( w.clause->removed )
                {
                    ++i;
                    continue;
                }
                if ( value( w.blocker ) == Value::True )
                {
                    ws[ j++ ] = ws[ i++ ];
                    continue;
                }
                Clause& c = *w.clause;
                if ( c.lits[ 0 ] == false_lit )
                    std::swap( c.lits[ 0 ], c.lits[ 1 ] );
                ++i;
                Lit first = c.lits[ 0 ];
                Watcher nw{ &c, first };
                if ( first != w.blocker && value( first ) == Value::True )
                {
                    ws[ j++ ] = nw;
                    continue;
                }
                bool found = false;
                for ( std::size_t k = 2; k < c.lits.size(); ++k )
                {
                    if ( value( c.lits[ k ] ) != Value::False )
                    {
                        std::swap( c.lits[ 1 ], c.lits[ k ] );
                        watches[ ( ~c.lits[ 1 ] ).index() ].push_back( nw );
                        found = true;
                        break;
                    }
                }
                if ( found )
                    continue;
                ws[ j++ ] = nw;
                if ( value( first ) == Value::False )
                {
                    confl = &c;
                    qhead = trail.size();
                    while ( i < ws.size() )
                        ws[ j++ ] = ws[ i++ ];
                }
                else
                    enqueue( first, &c );
            }
            ws.resize( j );
        }
        return confl;
    }

    void var_bump( Var v )
    {
        if ( ( activity[ v ] += var_inc ) > 1e100 )
        {
            for ( auto& a : activity )
                a *= 1e-100;
            var_inc *= 1e-100;
        }
        order.increased( v );
    }

    void cla_bump( Clause& c )
    {
        if ( ( c.activity += cla_inc ) > 1e20 )
        {
            for ( auto& l : learnts )
                l->activity *= 1e-20;
            cla_inc *= 1e-20;
        }
    }

    bool redundant( Lit p, std::uint32_t abstract_levels, std::vector< Lit >& to_clear )
    {
        std::vector< Lit > stack{ p };
        const std::size_t top = to_clear.size();
        while ( !stack.empty() )
        {
            Lit q = stack.back();
            stack.pop_back();
            Clause* c = reason[ q.var() ];
            assert( c != nullptr );
            for ( std::size_t i = 1; i < c->lits.size(); ++i )
            {
                Lit l = c->lits[ i ];
                Var v = l.var();
                if ( seen[ v ] || level[ v ] == 0 )
                    continue;
                if ( reason[ v ] != nullptr && ( abstract_levels & ( 1u << ( level[ v ] & 31 ) ) ) != 0 )
                {
                    seen[ v ] = 1;
                    stack.push_back( l );
                    to_clear.push_back( l );
                }
                else
                {
                    for ( std::size_t k = top; k < to_clear.size(); ++k )
                        seen[ to_clear[ k ].var() ] = 0;
                    to_clear.resize( top );
                    return false;
                }
            }
        }
        return true;
    }

    void analyze( Clause* confl, std::vector< Lit >& out, int& bt_level )
    {
        int path = 0;
        Lit p = undef_lit;
        out.clear();
        out.push_back( undef_lit );
        std::size_t index = trail.size();
        do
        {
            Clause& c = *confl;
            if ( c.learnt )
                cla_bump( c );
            for ( std::size_t i = ( p == undef_lit ) ? 0 : 1; i < c.lits.size(); ++i )
            {
                Lit q = c.lits[ i ];
                Var v = q.var();
                if ( !seen[ v ] && level[ v ] > 0 )
                {
                    var_bump( v );
                    seen[ v ] = 1;
                    if ( level[ v ] >= decision_level() )
                        ++path;
                    else
                        out.push_back( q );
                }
            }
            while ( !seen[ trail[ --index ].var() ] )
                ;
            p = trail[ index ];
            confl = reason[ p.var() ];
            seen[ p.var() ] = 0;
            --path;
        } while ( path > 0 );
        out[ 0 ] = ~p;

        // Recursive minimization.
        std::vector< Lit > to_clear( out.begin(), out.end() );
        std::uint32_t abstract_levels = 0;
        for ( std::size_t i = 1; i < out.size(); ++i )
            abstract_levels |= 1u << ( level[ out[ i ].var() ] & 31 );
        std::size_t j = 1;
        for ( std::size_t i = 1; i < out.size(); ++i )
            if ( reason[ out[ i ].var() ] == nullptr || !redundant( out[ i ], abstract_levels, to_clear ) )
                out[ j++ ] = out[ i ];
        out.resize( j );

        if ( out.size() == 1 )
            bt_level = 0;
        else
        {
            std::size_t max_i = 1;
            for ( std::size_t i = 2; i < out.size(); ++i )
                if ( level[ out[ i ].var() ] > level[ out[ max_i ].var() ] )
                    max_i = i;
            std::swap( out[ 1 ], out[ max_i ] );
            bt_level = level[ out[ 1 ].var() ];
        }
        for ( Lit l : to_clear )
            seen[ l.var() ] = 0;
    }

    // Expresses the conflict on literal p in terms of assumptions.
    void analyze_final( Lit p )
    {
        conflict_core.clear();
        conflict_core.push_back( p );
        if ( decision_level() == 0 )
            return;
        seen[ p.var() ] = 1;
        for ( int i = static_cast< int >( trail.size() ) - 1; i >= trail_lim[ 0 ]; --i )
        {
            Var x = trail[ i ].var();
            if ( !seen[ x ] )
                continue;
            if ( reason[ x ] == nullptr )
            {
                assert( level[ x ] > 0 );
                conflict_core.push_back( ~trail[ i ] );
            }
            else
            {
                const Clause& c = *reason[ x ];
                for ( std::size_t j = 1; j < c.lits.size(); ++j )
                    if ( level[ c.lits[ j ].var() ] > 0 )
                        seen[ c.lits[ j ].var() ] = 1;
            }
            seen[ x ] = 0;
        }
        seen[ p.var() ] = 0;
    }

    void finish_core()
    {
        // The core was collected as a clause over negated assumptions.
        for ( auto& l : conflict_core )
            l = ~l;
        std::sort( conflict_core.begin(), conflict_core.end() );
        conflict_core.erase( std::unique( conflict_core.begin(), conflict_core.end() ), conflict_core.end() );
    }

    void cancel_until( int lvl )
    {
        if ( decision_level() <= lvl )
            return;
        for ( int c = static_cast< int >( trail.size() ) - 1; c >= trail_lim[ lvl ]; --c )
        {
            Var x = trail[ c ].var();
            assigns[ x ] = Value::Undef;
            polarity[ x ] = trail[ c ].negated();
            reason[ x ] = nullptr;
            order.insert( x );
        }
        qhead = trail_lim[ lvl ];
        trail.resize( trail_lim[ lvl ] );
        trail_lim.resize( lvl );
    }

    std::uint64_t next_random()
    {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        return rng_state;
    }

    Lit pick_branch()
    {
        Var next = -1;
        if ( rng_state != 0 && ( next_random() % 100 ) == 0 && !order.empty() )
        {
            Var v = static_cast< Var >( next_random() % assigns.size() );
            if ( assigns[ v ] == Value::Undef )
                next = v;
        }
        while ( next == -1 || assigns[ next ] != Value::Undef )
        {
            if ( order.empty() )
                return undef_lit;
            next = order.pop();
        }
        return Lit::make( next, polarity[ next ] );
    }

    void reduce_db()
    {
        std::sort( learnts.begin(), learnts.end(), []( const auto& a, const auto& b ) {
            if ( ( a->lits.size() > 2 ) != ( b->lits.size() > 2 ) )
                return a->lits.size() > 2;
            return a->activity < b->activity;
        } );
        const std::size_t half = learnts.size() / 2;
        std::vector< std::unique_ptr< Clause > > keep;
        for ( std::size_t i = 0; i < learnts.size(); ++i )
        {
            Clause* c = learnts[ i ].get();
            bool locked = reason[ c->lits[ 0 ].var() ] == c && value( c->lits[ 0 ] ) == Value::True;
            if ( i < half && c->lits.size() > 2 && !locked )
                c->removed = true;
            else
                keep.push_back( std::move( learnts[ i ] ) );
        }
        // Removed clauses stay alive until their watchers are purged.
        for ( auto& ws : watches )
            std::erase_if( ws, []( const Watcher& w ) { return w.clause->removed; } );
        for ( std::size_t i = 0; i < learnts.size(); ++i )
            if ( learnts[ i ] && learnts[ i ]->removed )
                learnts[ i ].reset();
        learnts = std::move( keep );
    }

    Result search( int nof_conflicts )
    {
        int conflicts_here = 0;
        std::vector< Lit > learnt;
        for ( ;; )
        {
            Clause* confl = propagate();
            if ( confl != nullptr )
            {
                ++stats.conflicts;
                ++conflicts_here;
                if ( decision_level() == 0 )
                {
                    ok = false;
                    return Result::Unsat;
                }
                int bt = 0;
                analyze( confl, learnt, bt );
                cancel_until( bt );
                if ( learnt.size() == 1 )
                    enqueue( learnt[ 0 ], nullptr );
                else
                {
                    auto c = std::make_unique< Clause >();
                    c->lits = learnt;
                    c->learnt = true;
                    attach( c.get() );
                    cla_bump( *c );
                    enqueue( learnt[ 0 ], c.get() );
                    learnts.push_back( std::move( c ) );
                }
                var_inc /= var_decay;
                cla_inc /= cla_decay;
                continue;
            }

            if ( ( nof_conflicts >= 0 && conflicts_here >= nof_conflicts ) ||
                 ( conflict_budget != 0 && stats.conflicts >= conflict_budget ) )
            {
                cancel_until( 0 );
                return Result::Unknown;
            }
            if ( static_cast< double >( learnts.size() ) - static_cast< double >( trail.size() ) >= max_learnts )
                reduce_db();

            Lit next = undef_lit;
            while ( decision_level() < static_cast< int >( assumptions.size() ) )
            {
                Lit p = assumptions[ decision_level() ];
                if ( value( p ) == Value::True )
                    trail_lim.push_back( static_cast< int >( trail.size() ) );
                else if ( value( p ) == Value::False )
                {
                    analyze_final( ~p );
                    return Result::Unsat;
                }
                else
                {
                    next = p;
                    break;
                }
            }
            if ( next == undef_lit )
            {
                ++stats.decisions;
                next = pick_branch();
                if ( next == undef_lit )
                    return Result::Sat;
            }
            trail_lim.push_back( static_cast< int >( trail.size() ) );
            enqueue( next, nullptr );
        }
    }

    Result solve( std::span< const Lit > assumps )
    {
        ++stats.solves;
        model.clear();
        conflict_core.clear();
        if ( !ok )
            return Result::Unsat;
        assumptions.assign( assumps.begin(), assumps.end() );
        for ( Lit l : assumptions )
            while ( l.var() >= static_cast< Var >( assigns.size() ) )
                new_var();
        max_learnts = std::max< double >( static_cast< double >( clauses.size() ) / 3.0, 2000.0 );
        const std::uint64_t start_conflicts = stats.conflicts;
        Result status = Result::Unknown;
        int curr_restarts = 0;
        while ( status == Result::Unknown )
        {
            const double budget = luby( 2.0, curr_restarts ) * 100;
            status = search( static_cast< int >( budget ) );
            if ( status == Result::Unknown )
            {
                if ( conflict_budget != 0 && stats.conflicts - start_conflicts >= conflict_budget )
                    break;
                ++stats.restarts;
                ++curr_restarts;
                max_learnts *= 1.05;
            }
        }
        if ( status == Result::Sat )
            model.assign( assigns.begin(), assigns.end() );
        else if ( status == Result::Unsat )
            finish_core();
        cancel_until( 0 );
        return status;
    }
};

Solver::Solver() : _impl{ std::make_unique< Impl >() } {}
Solver::~Solver() = default;
Solver::Solver( Solver&& ) noexcept = default;
Solver& Solver::operator=( Solver&& ) noexcept = default;

Var Solver::new_var() { return _impl->new_var(); }
int Solver::num_vars() const { return static_cast< int >( _impl->assigns.size() ); }
std::size_t Solver::num_clauses() const { return _impl->clauses.size(); }
bool Solver::add_clause( std::span< const Lit > lits ) { return _impl->add_clause( lits ); }
Result Solver::solve( std::span< const Lit > assumptions ) { return _impl->solve( assumptions ); }

Value Solver::model_value( Var v ) const
{
    if ( v < 0 || static_cast< std::size_t >( v ) >= _impl->model.size() )
        return Value::Undef;
    return _impl->model[ v ];
}

bool Solver::model_true( Lit l ) const
{
    Value v = model_value( l.var() );
    return v != Value::Undef && ( ( v == Value::True ) != l.negated() );
}

const std::vector< Lit >& Solver::failed_assumptions() const { return _impl->conflict_core; }

void Solver::set_conflict_budget( std::uint64_t conflicts ) { _impl->conflict_budget = conflicts; }

void Solver::set_seed( std::uint64_t seed )
{
    // xorshift needs a non-zero state; seed 0 keeps decisions purely VSIDS.
    _impl->rng_state = seed == 0 ? 0 : seed * 0x9E3779B97F4A7C15ull | 1;
}

const SolverStats& Solver::stats() const { return _impl->stats; }
bool Solver::okay() const { return _impl->ok; }

} // namespace specfence::logic::sat
