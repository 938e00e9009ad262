#pragma once

#include "specfence/certificate/sexpr.hpp"
#include "specfence/encode/transition_system.hpp"
#include "specfence/logic/cube.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace specfence::certificate
{

using encode::TransitionSystem;
using logic::Cube;

// Header fields; the mode and the active fences come from the system.
struct CertificateInfo
{
    std::string program;
    std::string threat;
};

// Bit-level SMT-LIB2 scripts. State bit b of the system is x<b>, its next
// value y<b>, input bit j is u<j>; Init, Tr, Bad, Inv and Inv_next are
// defined over them and followed by one check per invariant condition,
// each expected to be unsat. The invariant is a conjunction of clauses, one
// per cube, each cube over the system's bit layout.
std::string export_certificate( const TransitionSystem& ts, const std::vector< Cube >& invariant,
                                const CertificateInfo& info );
// Same for an arbitrary formula over the current-state variables.
std::string export_certificate( const TransitionSystem& ts, const logic::Formula& invariant,
                                const CertificateInfo& info );

enum class Condition
{
    Initiation = 1,
    Consecution = 2,
    Safety = 3,
};

std::string to_string( Condition c );

struct CheckResult
{
    bool pass = false;
    std::optional< Condition > failed;
    // Values of the declared constants in a model of the failing check;
    // empty when the oracle gives none.
    std::map< std::string, bool > witness;
};

class OracleError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Runs the script with the built-in solver.
CheckResult check_certificate( std::string_view text );
// Runs "<command> <file>" on a temporary copy of the script and reads one
// sat/unsat line per check.
CheckResult check_certificate_external( std::string_view text, const std::string& command );

// Word-level rendering of a witness, using the bit map in the header.
std::string render_witness( std::string_view text, const std::map< std::string, bool >& witness );

// Whether the cubes' clauses form a safe inductive invariant of ts.
std::optional< Condition > invariant_failure( const TransitionSystem& ts, const std::vector< Cube >& invariant );

// Greedily drops clauses while the rest stays a safe inductive invariant.
// Throws std::invalid_argument if the input is not one.
std::vector< Cube > minimize_invariant( const TransitionSystem& ts, const std::vector< Cube >& invariant );

} // namespace specfence::certificate
