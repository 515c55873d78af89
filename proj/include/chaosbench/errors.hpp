#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaosbench {

class IntegrationDiverged : public std::runtime_error {
public:
    explicit IntegrationDiverged(std::size_t step)
        : std::runtime_error("integration diverged at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// A closed-loop forecast produced a non-finite value.
class PredictionDiverged : public std::runtime_error {
public:
    explicit PredictionDiverged(std::size_t step)
        : std::runtime_error("closed-loop prediction diverged at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, std::size_t batch)
        : std::runtime_error("training loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch)),
          epoch_(epoch),
          batch_(batch) {}
    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_, batch_;
};

/// Normal equations could not be solved; carries a hint for the caller.
class IllConditioned : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Random reservoir draw with zero spectral radius.
class InitDegenerate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chaosbench
