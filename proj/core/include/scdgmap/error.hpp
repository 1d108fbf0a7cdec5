// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scdgmap {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A line that should match the trace/logcat grammar but does not.
class MalformedLine : public Error {
public:
    MalformedLine(std::size_t line, std::size_t position, const std::string& reason)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(position)
                + ": " + reason),
          line_number(line),
          position(position) {}

    std::size_t line_number;
    std::size_t position;
};

class UnpairedResumption : public Error {
public:
    UnpairedResumption(std::size_t line, const std::string& syscall)
        : Error("line " + std::to_string(line) + ": '<... " + syscall
                + " resumed>' with no pending unfinished call"),
          line_number(line) {}

    std::size_t line_number;
};

class XmlParseError : public Error {
public:
    XmlParseError(std::size_t line, const std::string& reason)
        : Error("xml line " + std::to_string(line) + ": " + reason), line_number(line) {}

    std::size_t line_number;
};

class MissingPackageName : public Error {
public:
    MissingPackageName() : Error("manifest root has no package attribute") {}
};

class DuplicateApiEntry : public Error {
public:
    explicit DuplicateApiEntry(const std::string& api)
        : Error("duplicate api entry: " + api), api_name(api) {}

    std::string api_name;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class SizeLimit : public Error {
public:
    SizeLimit(std::size_t nodes, std::size_t limit)
        : Error("graph with " + std::to_string(nodes) + " nodes exceeds matcher limit of "
                + std::to_string(limit)) {}
};

class NoEvidence : public Error {
public:
    explicit NoEvidence(const std::string& api)
        : Error("no SCDG of >= 2 nodes assigned to api " + api), api_name(api) {}

    std::string api_name;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace scdgmap
