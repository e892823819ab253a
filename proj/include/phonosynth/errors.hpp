#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phonosynth {

// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A phoneme or gesture name that the viseme table does not know.
class UnknownTokenError : public Error {
 public:
  explicit UnknownTokenError(const std::string& name)
      : Error("unknown token '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// Edit text that cannot be turned into a valid token sequence.
class InvalidEditError : public Error {
 public:
  using Error::Error;
};

// File content that violates a documented format. `path` is a JSON-pointer
// style location such as "/tokens/3/1".
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class OutOfVocabularyError : public Error {
 public:
  OutOfVocabularyError(std::string word, std::vector<std::string> suggestions);
  const std::string& word() const { return word_; }
  const std::vector<std::string>& suggestions() const { return suggestions_; }

 private:
  std::string word_;
  std::vector<std::string> suggestions_;
};

// No finite-cost repository match exists for an expanded query.
class NoMatchError : public Error {
 public:
  explicit NoMatchError(std::string query)
      : Error("no repository match for query [" + query + "]"), query_(std::move(query)) {}
  const std::string& query() const { return query_; }

 private:
  std::string query_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace phonosynth
