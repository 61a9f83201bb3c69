#pragma once

#include <stdexcept>
#include <string>

namespace herdsim {

// Invalid parameter values (grid sizes, probabilities, thresholds).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A protocol operation invoked in a state it does not support,
// e.g. encoding a message under the silent protocol.
class ProtocolViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A message batch mixing payload kinds, or a message that fails to decode.
class MalformedMessage : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class FusionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class StatsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace herdsim
