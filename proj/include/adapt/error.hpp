#pragma once

#include <stdexcept>
#include <string>

namespace adapt {

/// Base for every error raised by the library. `what()` carries the full
/// message; subclasses add the structured context callers switch on.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or document. `path()` names the offending field
/// (e.g. "slots[3].hp.lr_embed").
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::string op, int epoch)
        : Error(op + ": non-finite loss at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Data does not satisfy an operation's precondition (empty class, too few
/// examples, empty pool, malformed CSV row...).
class DataError : public Error {
public:
    using Error::Error;
};

/// An operator failed inside a pipeline; `slot()` is the 1-based slot index.
class SlotError : public Error {
public:
    SlotError(int slot, const std::string& module, const std::string& message)
        : Error("slot " + std::to_string(slot) + " (" + module + "): " + message), slot_(slot) {}

    int slot() const noexcept { return slot_; }

private:
    int slot_;
};

}  // namespace adapt
