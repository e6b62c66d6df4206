#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shotsort {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class FormatError : public Error {
public:
    FormatError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Value outside a calibrated range; carries the index of the closest table entry.
class OutOfRange : public Error {
public:
    OutOfRange(const std::string& what, std::size_t nearest_entry, int nearest_n)
        : Error(what), nearest_entry_(nearest_entry), nearest_n_(nearest_n) {}
    std::size_t nearest_entry() const noexcept { return nearest_entry_; }
    int nearest_n() const noexcept { return nearest_n_; }

private:
    std::size_t nearest_entry_;
    int nearest_n_;
};

// A class received no members during sorting.
class DegenerateClass : public Error {
public:
    explicit DegenerateClass(std::size_t class_id)
        : Error("class " + std::to_string(class_id) + " has no members"),
          class_id_(class_id) {}
    std::size_t class_id() const noexcept { return class_id_; }

private:
    std::size_t class_id_;
};

} // namespace shotsort
