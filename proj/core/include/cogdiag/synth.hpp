#pragma once

#include <string>

#include "cogdiag/esve.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

/// base + per_unit * count, clamped to [0, cap].
struct LinearRate {
    double base = 0.0;
    double per_unit = 0.0;
    double cap = 1.0;

    double at(int count) const;
};

struct GenerativeSpec {
    std::size_t students = 100;
    std::size_t questions = 20;
    std::size_t skills = 4;
    double q_density = 0.3;
    double profile_density = 0.5;
    LinearRate slip;   // evaluated at the student's true level
    LinearRate guess;  // evaluated at the cell's true deficiency
    double mask_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

/// Ground-truth instance: Q, profiles, ideal responses and noisy outcomes.
struct GeneratedData {
    QMatrix q;
    std::vector<SkillProfile> profiles;
    ResponseMatrix responses;
    std::vector<std::uint8_t> ideal;  // S*M row-major xi
};

GeneratedData generate(const GenerativeSpec& spec);

/// Every profile that reproduces the given right/wrong sets exactly under
/// the noise-free conjunctive rule. Independent of the solver: enumerates all
/// 2^K candidates directly from the definition. K must be <= 20.
std::vector<BitVec> brute_force_feasible_profiles(const LabeledQuestionSets& sets,
                                                  std::size_t skill_count);

/// Generator parameters, true profiles and ideal responses for harness use.
std::string truth_json(const GeneratedData& data, const GenerativeSpec& spec);

}  // namespace cogdiag
