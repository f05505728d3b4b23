#pragma once

#include <stdexcept>
#include <string>

namespace erm {

/// Base of every error raised by the library. `code()` is a stable
/// machine-readable identifier used by the CLI and the tests.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define ERM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

// scm_engine
ERM_DEFINE_ERROR(InvalidScm)
ERM_DEFINE_ERROR(UnknownVariable)
ERM_DEFINE_ERROR(ValueOutOfDomain)
ERM_DEFINE_ERROR(StateSpaceTooLarge)
ERM_DEFINE_ERROR(ZeroProbabilityEvidence)
ERM_DEFINE_ERROR(DomainMismatch)

// epistemic_graph
ERM_DEFINE_ERROR(NoEvidence)
ERM_DEFINE_ERROR(InvalidGraph)

// ctl_store
ERM_DEFINE_ERROR(NonMonotonicTimestamp)
ERM_DEFINE_ERROR(PersistenceFailure)
ERM_DEFINE_ERROR(NoInterventionRecords)
ERM_DEFINE_ERROR(InvalidParameter)

// failure_registry
ERM_DEFINE_ERROR(PreconditionViolation)
ERM_DEFINE_ERROR(InsufficientWindow)

// agent_loop
ERM_DEFINE_ERROR(SourceFailure)
ERM_DEFINE_ERROR(NoEpisodes)

// txn_manager
ERM_DEFINE_ERROR(CompensationFailure)
ERM_DEFINE_ERROR(InvalidTransaction)

// consensus
ERM_DEFINE_ERROR(EmptySwarm)

// eval_harness
ERM_DEFINE_ERROR(AllUnparseable)
ERM_DEFINE_ERROR(NoFailures)
ERM_DEFINE_ERROR(InvalidCounts)

// scenario / config files
ERM_DEFINE_ERROR(FormatError)

#undef ERM_DEFINE_ERROR

}  // namespace erm
