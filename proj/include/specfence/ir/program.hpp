#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace specfence::ir
{

using Label = std::uint32_t;

enum class ExprKind
{
    Var,
    Const,
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Not,
    Eq,
    Ult,
    Ule,
    Ite,
    Zext,
    Trunc,
};

struct Expr;
using ExprPtr = std::shared_ptr< const Expr >;

// Typed expression tree. Every node carries its resolved bit-width.
struct Expr
{
    ExprKind kind;
    unsigned width = 0;
    std::string name;        // Var
    std::uint64_t value = 0; // Const
    std::vector< ExprPtr > args;
};

bool operator==( const Expr& a, const Expr& b );

ExprPtr make_var( std::string name, unsigned width );
ExprPtr make_const( std::uint64_t value, unsigned width );
ExprPtr make_expr( ExprKind kind, unsigned width, std::vector< ExprPtr > args );

struct Assign
{
    std::string dest;
    ExprPtr value;
};

struct CondBranch
{
    ExprPtr cond;
    Label then_target;
    Label else_target;
};

struct Goto
{
    Label target;
};

struct Load
{
    std::string dest;
    std::string array;
    ExprPtr index;
};

struct Store
{
    std::string array;
    ExprPtr index;
    ExprPtr value;
};

struct Assume
{
    ExprPtr cond;
};

struct Assert
{
    ExprPtr cond;
};

struct Halt
{
};

using Instruction = std::variant< Assign, CondBranch, Goto, Load, Store, Assume, Assert, Halt >;

bool same_instruction( const Instruction& a, const Instruction& b );

struct VarDecl
{
    std::string name;
    unsigned width;
    // Attacker-controlled source for the classical threat model.
    bool input = false;
};

struct ArrayDecl
{
    std::string name;
    unsigned length;
    unsigned elem_width;
};

struct Program
{
    std::string name;
    std::vector< VarDecl > vars;
    std::vector< ArrayDecl > arrays;
    std::vector< Instruction > insts;
    // Source line of each instruction; 0 for programmatically built ones.
    std::vector< int > lines;

    // The designated halt label: branching here ends the program.
    [[nodiscard]] Label halt_label() const { return static_cast< Label >( insts.size() ); }
    [[nodiscard]] Label entry() const { return 0; }

    [[nodiscard]] const VarDecl* find_var( std::string_view name ) const;
    [[nodiscard]] const ArrayDecl* find_array( std::string_view name ) const;
    [[nodiscard]] int line_of( Label l ) const;

    friend bool operator==( const Program& a, const Program& b );
};

// Width of the in-bounds index domain: ceil(log2 length), at least 1.
unsigned index_width( unsigned length );

// Control-flow successors of an instruction (the halt label included).
std::vector< Label > successors( const Program& p, Label l );

class ParseError : public std::runtime_error
{
public:
    ParseError( int line, int column, const std::string& message );
    int line;
    int column;
};

class ValidationError : public std::runtime_error
{
public:
    ValidationError( std::optional< Label > label, const std::string& message );
    std::optional< Label > label;
};

Program parse_program( std::string_view text );
void validate( const Program& p );

std::string print_program( const Program& p );
std::string print_expr( const Expr& e );
std::string print_instruction( const Instruction& inst );
std::string label_name( Label l );

std::set< Label > conditional_instructions( const Program& p );
std::set< Label > memory_instructions( const Program& p );

// Variables read by an expression.
void collect_vars( const Expr& e, std::set< std::string >& out );

} // namespace specfence::ir
