#pragma once

#include <stdexcept>
#include <string>

namespace prose {

/// Base of every error raised by the library. Each failure mode named by the
/// module contracts has its own subclass so callers can catch precisely.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

#define PROSE_DEFINE_ERROR(Name)              \
    class Name : public Error {               \
       public:                                \
        explicit Name(const std::string &msg) \
            : Error(std::string(#Name ": ") + msg) {} \
    }

// symbolic
PROSE_DEFINE_ERROR(InvalidExpression);
PROSE_DEFINE_ERROR(ExponentOutOfRange);
PROSE_DEFINE_ERROR(MalformedTriplet);
PROSE_DEFINE_ERROR(DomainError);
PROSE_DEFINE_ERROR(PlaceholderPresent);
PROSE_DEFINE_ERROR(NotInAdditiveForm);
PROSE_DEFINE_ERROR(DimensionMismatch);

// dataset
PROSE_DEFINE_ERROR(ZeroSignal);
PROSE_DEFINE_ERROR(GenerationExhausted);
PROSE_DEFINE_ERROR(DimensionTooLarge);
PROSE_DEFINE_ERROR(SchemaMismatch);

// nn / model / training
PROSE_DEFINE_ERROR(ShapeMismatch);
PROSE_DEFINE_ERROR(NonFiniteGradient);
PROSE_DEFINE_ERROR(UnknownToken);
PROSE_DEFINE_ERROR(NonFiniteLoss);

#undef PROSE_DEFINE_ERROR

/// Truncated or otherwise unreadable record in a container file.
class CorruptRecord : public Error {
   public:
    CorruptRecord(std::size_t record_index, const std::string &msg)
        : Error("CorruptRecord: record " + std::to_string(record_index) + ": " + msg),
          record_index_(record_index) {}
    std::size_t record_index() const { return record_index_; }

   private:
    std::size_t record_index_;
};

/// Integrator failures carry the last time the state was still valid.
class SolverError : public Error {
   public:
    SolverError(const std::string &what, double last_time)
        : Error(what + " (last valid t=" + std::to_string(last_time) + ")"), last_time_(last_time) {}
    double last_time() const { return last_time_; }

   private:
    double last_time_;
};

class StepSizeUnderflow : public SolverError {
   public:
    explicit StepSizeUnderflow(double t) : SolverError("StepSizeUnderflow", t) {}
};

class NonFiniteState : public SolverError {
   public:
    explicit NonFiniteState(double t) : SolverError("NonFiniteState", t) {}
};

class MaxStepsExceeded : public SolverError {
   public:
    explicit MaxStepsExceeded(double t) : SolverError("MaxStepsExceeded", t) {}
};

}  // namespace prose
