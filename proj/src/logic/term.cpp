#include "specfence/logic/term.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace specfence::logic
{

Op Term::op() const { return _node->op; }
unsigned Term::width() const { return _node->width; }
bool Term::is_const() const { return _node->op == Op::Const; }
bool Term::is_true() const { return is_const() && _node->width == 1 && _node->value == 1; }
bool Term::is_false() const { return is_const() && _node->width == 1 && _node->value == 0; }
std::uint64_t Term::const_value() const { return _node->value; }
const std::vector< Term >& Term::args() const { return _node->args; }

namespace
{

Term make( Op op, unsigned width, std::vector< Term > args, std::uint64_t value = 0 )
{
    auto node = std::make_shared< TermNode >();
    node->op = op;
    node->width = width;
    node->value = value;
    node->args = std::move( args );
    return Term{ std::move( node ) };
}

void require_same_width( const Term& a, const Term& b, const char* what )
{
    if ( a.width() != b.width() )
        throw TypeError( std::string( what ) + ": operand widths differ (" + std::to_string( a.width() ) +
                         " vs " + std::to_string( b.width() ) + ")" );
}

bool all_const( std::initializer_list< const Term* > ts )
{
    return std::all_of( ts.begin(), ts.end(), []( const Term* t ) { return t->is_const(); } );
}

std::uint64_t fold( Op op, unsigned width, std::span< const std::uint64_t > v, std::uint64_t aux )
{
    const auto m = width_mask( width );
    switch ( op )
    {
    case Op::Not: return ~v[ 0 ] & m;
    case Op::And: return v[ 0 ] & v[ 1 ];
    case Op::Or: return v[ 0 ] | v[ 1 ];
    case Op::Xor: return v[ 0 ] ^ v[ 1 ];
    case Op::Add: return ( v[ 0 ] + v[ 1 ] ) & m;
    case Op::Sub: return ( v[ 0 ] - v[ 1 ] ) & m;
    case Op::Mul: return ( v[ 0 ] * v[ 1 ] ) & m;
    case Op::Eq: return v[ 0 ] == v[ 1 ] ? 1 : 0;
    case Op::Ult: return v[ 0 ] < v[ 1 ] ? 1 : 0;
    case Op::Ule: return v[ 0 ] <= v[ 1 ] ? 1 : 0;
    case Op::Ite: return v[ 0 ] ? v[ 1 ] : v[ 2 ];
    case Op::Zext: return v[ 0 ];
    case Op::Trunc: return v[ 0 ] & m;
    case Op::Extract: return ( v[ 0 ] >> aux ) & 1;
    default: break;
    }
    throw std::logic_error( "fold: unexpected operator" );
}

} // namespace

Term constant( std::uint64_t value, unsigned width )
{
    if ( width == 0 || width > max_width )
        throw TypeError( "constant width out of range: " + std::to_string( width ) );
    return make( Op::Const, width, {}, value & width_mask( width ) );
}

Term variable( std::string name, unsigned width, std::size_t index )
{
    if ( width == 0 || width > max_width )
        throw TypeError( "variable '" + name + "' has width out of range" );
    auto node = std::make_shared< TermNode >();
    node->op = Op::Var;
    node->width = width;
    node->value = index;
    node->name = std::move( name );
    return Term{ std::move( node ) };
}

Term bool_const( bool value )
{
    static const Term t = constant( 1, 1 );
    static const Term f = constant( 0, 1 );
    return value ? t : f;
}

Term bv_not( const Term& a )
{
    if ( a.is_const() )
        return constant( ~a.const_value(), a.width() );
    if ( a.op() == Op::Not )
        return a.args()[ 0 ];
    return make( Op::Not, a.width(), { a } );
}

Term bv_and( const Term& a, const Term& b )
{
    require_same_width( a, b, "and" );
    const auto m = width_mask( a.width() );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() & b.const_value(), a.width() );
    if ( a.is_const() && a.const_value() == 0 )
        return a;
    if ( b.is_const() && b.const_value() == 0 )
        return b;
    if ( a.is_const() && a.const_value() == m )
        return b;
    if ( b.is_const() && b.const_value() == m )
        return a;
    if ( a == b )
        return a;
    return make( Op::And, a.width(), { a, b } );
}

Term bv_or( const Term& a, const Term& b )
{
    require_same_width( a, b, "or" );
    const auto m = width_mask( a.width() );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() | b.const_value(), a.width() );
    if ( a.is_const() && a.const_value() == m )
        return a;
    if ( b.is_const() && b.const_value() == m )
        return b;
    if ( a.is_const() && a.const_value() == 0 )
        return b;
    if ( b.is_const() && b.const_value() == 0 )
        return a;
    if ( a == b )
        return a;
    return make( Op::Or, a.width(), { a, b } );
}

Term bv_xor( const Term& a, const Term& b )
{
    require_same_width( a, b, "xor" );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() ^ b.const_value(), a.width() );
    if ( a.is_const() && a.const_value() == 0 )
        return b;
    if ( b.is_const() && b.const_value() == 0 )
        return a;
    if ( a == b )
        return constant( 0, a.width() );
    return make( Op::Xor, a.width(), { a, b } );
}

Term add( const Term& a, const Term& b )
{
    require_same_width( a, b, "add" );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() + b.const_value(), a.width() );
    if ( a.is_const() && a.const_value() == 0 )
        return b;
    if ( b.is_const() && b.const_value() == 0 )
        return a;
    return make( Op::Add, a.width(), { a, b } );
}

Term sub( const Term& a, const Term& b )
{
    require_same_width( a, b, "sub" );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() - b.const_value(), a.width() );
    if ( b.is_const() && b.const_value() == 0 )
        return a;
    if ( a == b )
        return constant( 0, a.width() );
    return make( Op::Sub, a.width(), { a, b } );
}

Term mul( const Term& a, const Term& b )
{
    require_same_width( a, b, "mul" );
    if ( all_const( { &a, &b } ) )
        return constant( a.const_value() * b.const_value(), a.width() );
    if ( ( a.is_const() && a.const_value() == 0 ) || ( b.is_const() && b.const_value() == 1 ) )
        return a;
    if ( ( b.is_const() && b.const_value() == 0 ) || ( a.is_const() && a.const_value() == 1 ) )
        return b;
    return make( Op::Mul, a.width(), { a, b } );
}

Term eq( const Term& a, const Term& b )
{
    require_same_width( a, b, "eq" );
    if ( all_const( { &a, &b } ) )
        return bool_const( a.const_value() == b.const_value() );
    if ( a == b )
        return tt();
    if ( a.width() == 1 )
    {
        // Boolean equivalence folds further when one side is constant.
        if ( a.is_const() )
            return a.const_value() ? b : bv_not( b );
        if ( b.is_const() )
            return b.const_value() ? a : bv_not( a );
    }
    return make( Op::Eq, 1, { a, b } );
}

Term ult( const Term& a, const Term& b )
{
    require_same_width( a, b, "ult" );
    if ( all_const( { &a, &b } ) )
        return bool_const( a.const_value() < b.const_value() );
    if ( b.is_const() && b.const_value() == 0 )
        return ff();
    if ( a == b )
        return ff();
    return make( Op::Ult, 1, { a, b } );
}

Term ule( const Term& a, const Term& b )
{
    require_same_width( a, b, "ule" );
    if ( all_const( { &a, &b } ) )
        return bool_const( a.const_value() <= b.const_value() );
    if ( a.is_const() && a.const_value() == 0 )
        return tt();
    if ( a == b )
        return tt();
    return make( Op::Ule, 1, { a, b } );
}

Term ite( const Term& c, const Term& t, const Term& e )
{
    if ( c.width() != 1 )
        throw TypeError( "ite: condition must have width 1" );
    require_same_width( t, e, "ite" );
    if ( c.is_const() )
        return c.const_value() ? t : e;
    if ( t == e )
        return t;
    if ( t.width() == 1 && t.is_const() && e.is_const() )
        return t.const_value() ? c : bv_not( c );
    return make( Op::Ite, t.width(), { c, t, e } );
}

Term zext( const Term& a, unsigned width )
{
    if ( width < a.width() || width > max_width )
        throw TypeError( "zext: target width " + std::to_string( width ) + " smaller than operand width " +
                         std::to_string( a.width() ) );
    if ( width == a.width() )
        return a;
    if ( a.is_const() )
        return constant( a.const_value(), width );
    return make( Op::Zext, width, { a } );
}

Term trunc( const Term& a, unsigned width )
{
    if ( width > a.width() || width == 0 )
        throw TypeError( "trunc: target width " + std::to_string( width ) + " larger than operand width " +
                         std::to_string( a.width() ) );
    if ( width == a.width() )
        return a;
    if ( a.is_const() )
        return constant( a.const_value(), width );
    return make( Op::Trunc, width, { a } );
}

Term extract_bit( const Term& a, unsigned bit )
{
    if ( bit >= a.width() )
        throw TypeError( "extract: bit index out of range" );
    if ( a.width() == 1 )
        return a;
    if ( a.is_const() )
        return bool_const( ( a.const_value() >> bit ) & 1 );
    return make( Op::Extract, 1, { a }, bit );
}

Term resize( const Term& a, unsigned width )
{
    return width >= a.width() ? zext( a, width ) : trunc( a, width );
}

Formula implies( const Formula& a, const Formula& b ) { return bv_or( bv_not( a ), b ); }
Formula iff( const Formula& a, const Formula& b ) { return eq( a, b ); }

Formula conj( std::span< const Formula > fs )
{
    Formula acc = tt();
    for ( const auto& f : fs )
        acc = bv_and( acc, f );
    return acc;
}

Formula disj( std::span< const Formula > fs )
{
    Formula acc = ff();
    for ( const auto& f : fs )
        acc = bv_or( acc, f );
    return acc;
}

Formula conj( std::initializer_list< Formula > fs ) { return conj( std::span< const Formula >( fs.begin(), fs.size() ) ); }
Formula disj( std::initializer_list< Formula > fs ) { return disj( std::span< const Formula >( fs.begin(), fs.size() ) ); }

std::uint64_t evaluate( const Term& root, std::span< const std::uint64_t > env )
{
    std::unordered_map< const TermNode*, std::uint64_t > memo;
    // Iterative post-order so deep ite chains do not exhaust the stack.
    std::vector< std::pair< const TermNode*, bool > > stack{ { root.get(), false } };
    std::vector< std::uint64_t > vals;
    while ( !stack.empty() )
    {
        auto [ n, expanded ] = stack.back();
        stack.pop_back();
        if ( memo.contains( n ) )
            continue;
        if ( n->op == Op::Const )
        {
            memo[ n ] = n->value;
            continue;
        }
        if ( n->op == Op::Var )
        {
            if ( n->value >= env.size() )
                throw std::out_of_range( "evaluate: no value for variable '" + n->name + "'" );
            memo[ n ] = env[ n->value ] & width_mask( n->width );
            continue;
        }
        if ( !expanded )
        {
            stack.emplace_back( n, true );
            for ( const auto& a : n->args )
                if ( !memo.contains( a.get() ) )
                    stack.emplace_back( a.get(), false );
            continue;
        }
        vals.clear();
        for ( const auto& a : n->args )
            vals.push_back( memo.at( a.get() ) );
        memo[ n ] = fold( n->op, n->width, vals, n->value );
    }
    return memo.at( root.get() );
}

namespace
{

void visit_dag( const Term& root, const std::function< void( const TermNode* ) >& fn )
{
    std::unordered_set< const TermNode* > seen;
    std::vector< const TermNode* > stack{ root.get() };
    while ( !stack.empty() )
    {
        const auto* n = stack.back();
        stack.pop_back();
        if ( !seen.insert( n ).second )
            continue;
        fn( n );
        for ( const auto& a : n->args )
            stack.push_back( a.get() );
    }
}

} // namespace

std::vector< std::size_t > variables_of( const Term& t )
{
    std::vector< std::size_t > out;
    for ( const auto& v : variable_nodes( t ) )
        out.push_back( v.const_value() );
    return out;
}

std::vector< Term > variable_nodes( const Term& t )
{
    std::map< std::size_t, Term > vars;
    std::unordered_set< const TermNode* > seen;
    std::vector< Term > stack{ t };
    while ( !stack.empty() )
    {
        Term n = stack.back();
        stack.pop_back();
        if ( !seen.insert( n.get() ).second )
            continue;
        if ( n.op() == Op::Var )
            vars.emplace( n.const_value(), n );
        for ( const auto& a : n.args() )
            stack.push_back( a );
    }
    std::vector< Term > out;
    for ( auto& [ _, v ] : vars )
        out.push_back( v );
    return out;
}

std::size_t dag_size( const Term& t )
{
    std::size_t count = 0;
    visit_dag( t, [ & ]( const TermNode* ) { ++count; } );
    return count;
}

Term rebuild( const TermNode& n, std::vector< Term > a )
{
    switch ( n.op )
    {
    case Op::Not: return bv_not( a[ 0 ] );
    case Op::And: return bv_and( a[ 0 ], a[ 1 ] );
    case Op::Or: return bv_or( a[ 0 ], a[ 1 ] );
    case Op::Xor: return bv_xor( a[ 0 ], a[ 1 ] );
    case Op::Add: return add( a[ 0 ], a[ 1 ] );
    case Op::Sub: return sub( a[ 0 ], a[ 1 ] );
    case Op::Mul: return mul( a[ 0 ], a[ 1 ] );
    case Op::Eq: return eq( a[ 0 ], a[ 1 ] );
    case Op::Ult: return ult( a[ 0 ], a[ 1 ] );
    case Op::Ule: return ule( a[ 0 ], a[ 1 ] );
    case Op::Ite: return ite( a[ 0 ], a[ 1 ], a[ 2 ] );
    case Op::Zext: return zext( a[ 0 ], n.width );
    case Op::Trunc: return trunc( a[ 0 ], n.width );
    case Op::Extract: return extract_bit( a[ 0 ], static_cast< unsigned >( n.value ) );
    case Op::Const: return constant( n.value, n.width );
    case Op::Var: break;
    }
    throw std::logic_error( "rebuild: variable nodes have no arguments" );
}

Term substitute( const Term& root, const std::function< Term( const TermNode& var ) >& replace )
{
    std::unordered_map< const TermNode*, Term > memo;
    std::vector< std::pair< Term, bool > > stack{ { root, false } };
    while ( !stack.empty() )
    {
        auto [ t, expanded ] = stack.back();
        stack.pop_back();
        if ( memo.contains( t.get() ) )
            continue;
        if ( t.op() == Op::Const )
        {
            memo.emplace( t.get(), t );
            continue;
        }
        if ( t.op() == Op::Var )
        {
            Term r = replace( t.node() );
            if ( r.width() != t.width() )
                throw TypeError( "substitute: replacement for '" + t.node().name + "' changes its width" );
            memo.emplace( t.get(), std::move( r ) );
            continue;
        }
        if ( !expanded )
        {
            stack.emplace_back( t, true );
            for ( const auto& a : t.args() )
                if ( !memo.contains( a.get() ) )
                    stack.emplace_back( a, false );
            continue;
        }
        std::vector< Term > args;
        bool same = true;
        for ( const auto& a : t.args() )
        {
            args.push_back( memo.at( a.get() ) );
            same = same && args.back() == a;
        }
        memo.emplace( t.get(), same ? t : rebuild( t.node(), std::move( args ) ) );
    }
    return memo.at( root.get() );
}

namespace
{

const char* op_name( Op op )
{
    switch ( op )
    {
    case Op::Not: return "bvnot";
    case Op::And: return "bvand";
    case Op::Or: return "bvor";
    case Op::Xor: return "bvxor";
    case Op::Add: return "bvadd";
    case Op::Sub: return "bvsub";
    case Op::Mul: return "bvmul";
    case Op::Eq: return "=";
    case Op::Ult: return "bvult";
    case Op::Ule: return "bvule";
    case Op::Ite: return "ite";
    case Op::Zext: return "zext";
    case Op::Trunc: return "trunc";
    case Op::Extract: return "bit";
    default: return "?";
    }
}

void render( const Term& t, std::ostream& os )
{
    switch ( t.op() )
    {
    case Op::Const: os << "#u" << t.width() << ":" << t.const_value(); return;
    case Op::Var: os << t.node().name; return;
    default: break;
    }
    os << "(" << op_name( t.op() );
    if ( t.op() == Op::Zext || t.op() == Op::Trunc )
        os << " " << t.width();
    if ( t.op() == Op::Extract )
        os << " " << t.const_value();
    for ( const auto& a : t.args() )
    {
        os << " ";
        render( a, os );
    }
    os << ")";
}

} // namespace

std::string to_string( const Term& t )
{
    std::ostringstream os;
    render( t, os );
    return os.str();
}

} // namespace specfence::logic
