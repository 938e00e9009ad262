#include "specfence/ir/program.hpp"

#include "specfence/logic/term.hpp"

#include <algorithm>
#include <sstream>

namespace specfence::ir
{

ParseError::ParseError( int l, int c, const std::string& message )
        : std::runtime_error( "line " + std::to_string( l ) + ", column " + std::to_string( c ) + ": " + message ),
          line{ l }, column{ c }
{
}

ValidationError::ValidationError( std::optional< Label > l, const std::string& message )
        : std::runtime_error( ( l ? label_name( *l ) + ": " : std::string{} ) + message ), label{ l }
{
}

bool operator==( const Expr& a, const Expr& b )
{
    if ( a.kind != b.kind || a.width != b.width || a.name != b.name || a.value != b.value ||
         a.args.size() != b.args.size() )
        return false;
    for ( std::size_t i = 0; i < a.args.size(); ++i )
        if ( !( *a.args[ i ] == *b.args[ i ] ) )
            return false;
    return true;
}

ExprPtr make_var( std::string name, unsigned width )
{
    return std::make_shared< Expr >( Expr{ ExprKind::Var, width, std::move( name ), 0, {} } );
}

ExprPtr make_const( std::uint64_t value, unsigned width )
{
    return std::make_shared< Expr >( Expr{ ExprKind::Const, width, {}, value, {} } );
}

ExprPtr make_expr( ExprKind kind, unsigned width, std::vector< ExprPtr > args )
{
    return std::make_shared< Expr >( Expr{ kind, width, {}, 0, std::move( args ) } );
}

namespace
{

bool same_expr( const ExprPtr& a, const ExprPtr& b )
{
    if ( !a || !b )
        return a == b;
    return *a == *b;
}

} // namespace

bool same_instruction( const Instruction& a, const Instruction& b )
{
    if ( a.index() != b.index() )
        return false;
    return std::visit(
            [ & ]( const auto& x ) -> bool {
                using T = std::decay_t< decltype( x ) >;
                const auto& y = std::get< T >( b );
                if constexpr ( std::is_same_v< T, Assign > )
                    return x.dest == y.dest && same_expr( x.value, y.value );
                else if constexpr ( std::is_same_v< T, CondBranch > )
                    return same_expr( x.cond, y.cond ) && x.then_target == y.then_target &&
                           x.else_target == y.else_target;
                else if constexpr ( std::is_same_v< T, Goto > )
                    return x.target == y.target;
                else if constexpr ( std::is_same_v< T, Load > )
                    return x.dest == y.dest && x.array == y.array && same_expr( x.index, y.index );
                else if constexpr ( std::is_same_v< T, Store > )
                    return x.array == y.array && same_expr( x.index, y.index ) && same_expr( x.value, y.value );
                else if constexpr ( std::is_same_v< T, Assume > || std::is_same_v< T, Assert > )
                    return same_expr( x.cond, y.cond );
                else
                    return true;
            },
            a );
}

bool operator==( const Program& a, const Program& b )
{
    auto var_eq = []( const VarDecl& x, const VarDecl& y ) {
        return x.name == y.name && x.width == y.width && x.input == y.input;
    };
    auto arr_eq = []( const ArrayDecl& x, const ArrayDecl& y ) {
        return x.name == y.name && x.length == y.length && x.elem_width == y.elem_width;
    };
    return a.name == b.name && std::equal( a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), var_eq ) &&
           std::equal( a.arrays.begin(), a.arrays.end(), b.arrays.begin(), b.arrays.end(), arr_eq ) &&
           std::equal( a.insts.begin(), a.insts.end(), b.insts.begin(), b.insts.end(), same_instruction );
}

const VarDecl* Program::find_var( std::string_view n ) const
{
    auto it = std::find_if( vars.begin(), vars.end(), [ & ]( const VarDecl& v ) { return v.name == n; } );
    return it == vars.end() ? nullptr : &*it;
}

const ArrayDecl* Program::find_array( std::string_view n ) const
{
    auto it = std::find_if( arrays.begin(), arrays.end(), [ & ]( const ArrayDecl& a ) { return a.name == n; } );
    return it == arrays.end() ? nullptr : &*it;
}

int Program::line_of( Label l ) const { return l < lines.size() ? lines[ l ] : 0; }

unsigned index_width( unsigned length )
{
    unsigned w = 1;
    while ( ( std::uint64_t{ 1 } << w ) < length )
        ++w;
    return w;
}

std::vector< Label > successors( const Program& p, Label l )
{
    if ( l >= p.insts.size() )
        return {};
    return std::visit(
            [ & ]( const auto& inst ) -> std::vector< Label > {
                using T = std::decay_t< decltype( inst ) >;
                if constexpr ( std::is_same_v< T, CondBranch > )
                {
                    if ( inst.then_target == inst.else_target )
                        return { inst.then_target };
                    return { inst.then_target, inst.else_target };
                }
                else if constexpr ( std::is_same_v< T, Goto > )
                    return { inst.target };
                else if constexpr ( std::is_same_v< T, Halt > )
                    return {};
                else
                    return { l + 1 };
            },
            p.insts[ l ] );
}

std::string label_name( Label l ) { return "L" + std::to_string( l ); }

std::set< Label > conditional_instructions( const Program& p )
{
    std::set< Label > out;
    for ( Label l = 0; l < p.insts.size(); ++l )
        if ( std::holds_alternative< CondBranch >( p.insts[ l ] ) )
            out.insert( l );
    return out;
}

std::set< Label > memory_instructions( const Program& p )
{
    std::set< Label > out;
    for ( Label l = 0; l < p.insts.size(); ++l )
        if ( std::holds_alternative< Load >( p.insts[ l ] ) || std::holds_alternative< Store >( p.insts[ l ] ) )
            out.insert( l );
    return out;
}

void collect_vars( const Expr& e, std::set< std::string >& out )
{
    if ( e.kind == ExprKind::Var )
        out.insert( e.name );
    for ( const auto& a : e.args )
        collect_vars( *a, out );
}

// ---------------------------------------------------------------- validation

namespace
{

void check_expr( const Program& p, const Expr& e, Label at )
{
    auto fail = [ & ]( const std::string& msg ) { throw ValidationError( at, msg + " in '" + print_expr( e ) + "'" ); };
    if ( e.width == 0 || e.width > logic::max_width )
        fail( "expression width out of range" );
    auto arg_width = [ & ]( std::size_t i ) { return e.args[ i ]->width; };
    switch ( e.kind )
    {
    case ExprKind::Var: {
        const auto* v = p.find_var( e.name );
        if ( v == nullptr )
            fail( p.find_array( e.name ) ? "array '" + e.name + "' used as a scalar" : "undeclared variable '" + e.name + "'" );
        if ( v->width != e.width )
            fail( "variable '" + e.name + "' has width " + std::to_string( v->width ) + ", used at width " +
                  std::to_string( e.width ) );
        return;
    }
    case ExprKind::Const:
        if ( ( e.value & ~logic::width_mask( e.width ) ) != 0 )
            fail( "constant " + std::to_string( e.value ) + " does not fit in " + std::to_string( e.width ) + " bits" );
        return;
    default: break;
    }
    for ( const auto& a : e.args )
        check_expr( p, *a, at );
    switch ( e.kind )
    {
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::And:
    case ExprKind::Or:
    case ExprKind::Xor:
        if ( e.args.size() != 2 || arg_width( 0 ) != e.width || arg_width( 1 ) != e.width )
            fail( "operand widths do not match" );
        break;
    case ExprKind::Not:
        if ( e.args.size() != 1 || arg_width( 0 ) != e.width )
            fail( "operand width does not match" );
        break;
    case ExprKind::Eq:
    case ExprKind::Ult:
    case ExprKind::Ule:
        if ( e.args.size() != 2 || arg_width( 0 ) != arg_width( 1 ) || e.width != 1 )
            fail( "comparison operands must have equal widths" );
        break;
    case ExprKind::Ite:
        if ( e.args.size() != 3 || arg_width( 0 ) != 1 || arg_width( 1 ) != e.width || arg_width( 2 ) != e.width )
            fail( "ite operands ill-typed" );
        break;
    case ExprKind::Zext:
        if ( e.args.size() != 1 || arg_width( 0 ) > e.width )
            fail( "zext to a narrower width" );
        break;
    case ExprKind::Trunc:
        if ( e.args.size() != 1 || arg_width( 0 ) < e.width )
            fail( "trunc to a wider width" );
        break;
    default: break;
    }
}

void check_cond( const Program& p, const ExprPtr& e, Label at, const char* what )
{
    if ( !e )
        throw ValidationError( at, std::string( what ) + " without condition" );
    check_expr( p, *e, at );
    if ( e->width != 1 )
        throw ValidationError( at, std::string( what ) + " condition must be 1-bit, got width " + std::to_string( e->width ) );
}

void check_target( const Program& p, Label target, Label at )
{
    if ( target > p.halt_label() )
        throw ValidationError( at, "branch to undefined label " + label_name( target ) );
}

} // namespace

void validate( const Program& p )
{
    std::set< std::string > names;
    for ( const auto& v : p.vars )
    {
        if ( v.width == 0 || v.width > logic::max_width )
            throw ValidationError( std::nullopt, "variable '" + v.name + "' width must be in 1..64" );
        if ( !names.insert( v.name ).second )
            throw ValidationError( std::nullopt, "duplicate declaration of '" + v.name + "'" );
    }
    for ( const auto& a : p.arrays )
    {
        if ( a.elem_width == 0 || a.elem_width > logic::max_width )
            throw ValidationError( std::nullopt, "array '" + a.name + "' element width must be in 1..64" );
        if ( a.length == 0 || a.length > 64 )
            throw ValidationError( std::nullopt, "array '" + a.name + "' length must be in 1..64" );
        if ( !names.insert( a.name ).second )
            throw ValidationError( std::nullopt, "duplicate declaration of '" + a.name + "'" );
    }
    if ( p.insts.empty() )
        throw ValidationError( std::nullopt, "program has no instructions" );

    for ( Label l = 0; l < p.insts.size(); ++l )
    {
        std::visit(
                [ & ]( const auto& inst ) {
                    using T = std::decay_t< decltype( inst ) >;
                    if constexpr ( std::is_same_v< T, Assign > )
                    {
                        const auto* d = p.find_var( inst.dest );
                        if ( d == nullptr )
                            throw ValidationError( l, "assignment to undeclared variable '" + inst.dest + "'" );
                        check_expr( p, *inst.value, l );
                        if ( inst.value->width != d->width )
                            throw ValidationError( l, "assigning a " + std::to_string( inst.value->width ) +
                                                              "-bit value to '" + inst.dest + "' of width " +
                                                              std::to_string( d->width ) );
                    }
                    else if constexpr ( std::is_same_v< T, CondBranch > )
                    {
                        check_cond( p, inst.cond, l, "branch" );
                        check_target( p, inst.then_target, l );
                        check_target( p, inst.else_target, l );
                    }
                    else if constexpr ( std::is_same_v< T, Goto > )
                        check_target( p, inst.target, l );
                    else if constexpr ( std::is_same_v< T, Load > )
                    {
                        const auto* d = p.find_var( inst.dest );
                        const auto* a = p.find_array( inst.array );
                        if ( d == nullptr )
                            throw ValidationError( l, "load into undeclared variable '" + inst.dest + "'" );
                        if ( a == nullptr )
                            throw ValidationError( l, "load from undeclared array '" + inst.array + "'" );
                        if ( d->width != a->elem_width )
                            throw ValidationError( l, "load of " + std::to_string( a->elem_width ) + "-bit element into '" +
                                                              inst.dest + "' of width " + std::to_string( d->width ) );
                        check_expr( p, *inst.index, l );
                    }
                    else if constexpr ( std::is_same_v< T, Store > )
                    {
                        const auto* a = p.find_array( inst.array );
                        if ( a == nullptr )
                            throw ValidationError( l, "store into undeclared array '" + inst.array + "'" );
                        check_expr( p, *inst.index, l );
                        check_expr( p, *inst.value, l );
                        if ( inst.value->width != a->elem_width )
                            throw ValidationError( l, "storing a " + std::to_string( inst.value->width ) +
                                                              "-bit value into '" + inst.array + "' of element width " +
                                                              std::to_string( a->elem_width ) );
                    }
                    else if constexpr ( std::is_same_v< T, Assume > )
                        check_cond( p, inst.cond, l, "assume" );
                    else if constexpr ( std::is_same_v< T, Assert > )
                        check_cond( p, inst.cond, l, "assert" );
                },
                p.insts[ l ] );
    }
}

// ------------------------------------------------------------------ printing

namespace
{

const char* binary_symbol( ExprKind k )
{
    switch ( k )
    {
    case ExprKind::Add: return "+";
    case ExprKind::Sub: return "-";
    case ExprKind::Mul: return "*";
    case ExprKind::And: return "&";
    case ExprKind::Or: return "|";
    case ExprKind::Xor: return "^";
    case ExprKind::Eq: return "==";
    case ExprKind::Ult: return "<";
    case ExprKind::Ule: return "<=";
    default: return nullptr;
    }
}

} // namespace

std::string print_expr( const Expr& e )
{
    switch ( e.kind )
    {
    case ExprKind::Var: return e.name;
    case ExprKind::Const: return std::to_string( e.value );
    case ExprKind::Not: return "~" + print_expr( *e.args[ 0 ] );
    case ExprKind::Ite:
        return "ite(" + print_expr( *e.args[ 0 ] ) + ", " + print_expr( *e.args[ 1 ] ) + ", " + print_expr( *e.args[ 2 ] ) + ")";
    case ExprKind::Zext: return "zext<" + std::to_string( e.width ) + ">(" + print_expr( *e.args[ 0 ] ) + ")";
    case ExprKind::Trunc: return "trunc<" + std::to_string( e.width ) + ">(" + print_expr( *e.args[ 0 ] ) + ")";
    default: break;
    }
    return "(" + print_expr( *e.args[ 0 ] ) + " " + binary_symbol( e.kind ) + " " + print_expr( *e.args[ 1 ] ) + ")";
}

std::string print_instruction( const Instruction& inst )
{
    return std::visit(
            []( const auto& i ) -> std::string {
                using T = std::decay_t< decltype( i ) >;
                if constexpr ( std::is_same_v< T, Assign > )
                    return i.dest + " := " + print_expr( *i.value );
                else if constexpr ( std::is_same_v< T, CondBranch > )
                    return "br " + print_expr( *i.cond ) + " " + label_name( i.then_target ) + " " +
                           label_name( i.else_target );
                else if constexpr ( std::is_same_v< T, Goto > )
                    return "goto " + label_name( i.target );
                else if constexpr ( std::is_same_v< T, Load > )
                    return i.dest + " := load " + i.array + "[" + print_expr( *i.index ) + "]";
                else if constexpr ( std::is_same_v< T, Store > )
                    return "store " + i.array + "[" + print_expr( *i.index ) + "] := " + print_expr( *i.value );
                else if constexpr ( std::is_same_v< T, Assume > )
                    return "assume " + print_expr( *i.cond );
                else if constexpr ( std::is_same_v< T, Assert > )
                    return "assert " + print_expr( *i.cond );
                else
                    return "halt";
            },
            inst );
}

std::string print_program( const Program& p )
{
    std::ostringstream os;
    os << "program " << p.name << "\n";
    for ( const auto& v : p.vars )
        os << ( v.input ? "input " : "var " ) << v.name << " : u" << v.width << "\n";
    for ( const auto& a : p.arrays )
        os << "array " << a.name << "[" << a.length << "] : u" << a.elem_width << "\n";
    for ( Label l = 0; l < p.insts.size(); ++l )
        os << label_name( l ) << ": " << print_instruction( p.insts[ l ] ) << "\n";
    return os.str();
}

} // namespace specfence::ir
