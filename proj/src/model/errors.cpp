#include "phonosynth/errors.hpp"

namespace phonosynth {

namespace {

std::string oov_message(const std::string& word, const std::vector<std::string>& suggestions) {
  std::string msg = "out-of-vocabulary word '" + word + "'";
  if (!suggestions.empty()) {
    msg += " (did you mean";
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
      msg += (i ? ", " : " ") + suggestions[i];
    }
    msg += "?)";
  }
  return msg;
}

}  // namespace

OutOfVocabularyError::OutOfVocabularyError(std::string word, std::vector<std::string> suggestions)
    : Error(oov_message(word, suggestions)), word_(std::move(word)), suggestions_(std::move(suggestions)) {}

}  // namespace phonosynth
