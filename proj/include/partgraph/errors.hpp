#pragma once

#include <stdexcept>
#include <string>

namespace partgraph {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonManifoldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateTriangleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyMeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroAreaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingletonBatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyGraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergedLossError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingSplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace partgraph
