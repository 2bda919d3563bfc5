#pragma once

#include <stdexcept>
#include <string>

namespace chorder {

/// Malformed input data: shape mismatches, wrong plane counts, empty planes.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration values (non-positive tau, vocabulary mismatch, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Corpus or checkpoint could not be read.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, int batch)
        : std::runtime_error("loss became non-finite at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch)),
          epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

} // namespace chorder
