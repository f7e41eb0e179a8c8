#pragma once

#include <stdexcept>
#include <string>

namespace skillbank {

struct KeyShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaVersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedRecord : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RemoteUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnbalancedGroup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownSkillId : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PhaseViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReflectorFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InadmissibleAction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace skillbank
