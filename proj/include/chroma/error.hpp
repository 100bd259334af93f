#pragma once

#include <stdexcept>
#include <string>

namespace chroma {

// Root of every exception thrown by the library. The CLI maps any of these to a
// one-line diagnostic and a nonzero exit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CHROMA_DEFINE_ERROR(Name)              \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

CHROMA_DEFINE_ERROR(FormatError);
CHROMA_DEFINE_ERROR(ShapeError);
CHROMA_DEFINE_ERROR(ConfigError);
CHROMA_DEFINE_ERROR(WeightLoadError);
CHROMA_DEFINE_ERROR(PartitionError);
CHROMA_DEFINE_ERROR(CheckpointError);
CHROMA_DEFINE_ERROR(StatisticError);
CHROMA_DEFINE_ERROR(ProtocolError);
CHROMA_DEFINE_ERROR(NotFoundError);

#undef CHROMA_DEFINE_ERROR

class IngestionError : public Error {
public:
    IngestionError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class TrainingError : public Error {
public:
    TrainingError(std::string term, long long step, const std::string& what)
        : Error("step " + std::to_string(step) + ": " + term + ": " + what),
          term_(std::move(term)), step_(step) {}
    const std::string& term() const noexcept { return term_; }
    long long step() const noexcept { return step_; }

private:
    std::string term_;
    long long step_;
};

}  // namespace chroma
