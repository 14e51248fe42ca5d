#pragma once

#include <stdexcept>
#include <string>

namespace batchdex {

struct OverflowError : std::runtime_error {
    explicit OverflowError(const std::string& what) : std::runtime_error(what) {}
};

struct MalformedError : std::runtime_error {
    explicit MalformedError(const std::string& what) : std::runtime_error(what) {}
};

struct PriceOutOfKeyRange : std::runtime_error {
    explicit PriceOutOfKeyRange(const std::string& what) : std::runtime_error(what) {}
};

struct DuplicateKeyError : std::runtime_error {
    explicit DuplicateKeyError(const std::string& what) : std::runtime_error(what) {}
};

struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientSupplyError : std::runtime_error {
    explicit InsufficientSupplyError(const std::string& what) : std::runtime_error(what) {}
};

struct MarginalKeyMismatch : std::runtime_error {
    explicit MarginalKeyMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ConservationViolation : std::runtime_error {
    explicit ConservationViolation(const std::string& what) : std::runtime_error(what) {}
};

struct PartitionViolation : std::runtime_error {
    explicit PartitionViolation(const std::string& what) : std::runtime_error(what) {}
};

struct SolverStall : std::runtime_error {
    explicit SolverStall(const std::string& what) : std::runtime_error(what) {}
};

struct StorageFailure : std::runtime_error {
    explicit StorageFailure(const std::string& what) : std::runtime_error(what) {}
};

} // namespace batchdex
