#include "cogdiag/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cogdiag/error.hpp"
#include "cogdiag/random.hpp"

namespace cogdiag {

double LinearRate::at(int count) const {
    return std::clamp(base + per_unit * static_cast<double>(count), 0.0, cap);
}

void GenerativeSpec::validate() const {
    if (students < 1 || questions < 1 || skills < 1)
        throw ConfigError("students, questions and skills must be >= 1");
    if (q_density <= 0 || q_density >= 1) throw ConfigError("q_density must lie in (0,1)");
    if (profile_density <= 0 || profile_density >= 1)
        throw ConfigError("profile_density must lie in (0,1)");
    for (const LinearRate& rate : {slip, guess}) {
        if (rate.base < 0 || rate.base > 1) throw ConfigError("rate base must lie in [0,1]");
        if (rate.cap <= 0 || rate.cap > 1) throw ConfigError("rate cap must lie in (0,1]");
    }
    if (mask_rate < 0 || mask_rate >= 1) throw ConfigError("mask_rate must lie in [0,1)");
}

GeneratedData generate(const GenerativeSpec& spec) {
    spec.validate();
    const std::size_t S = spec.students, M = spec.questions, K = spec.skills;
    RandomSource root(spec.seed);

    GeneratedData data;

    RandomSource q_rng = root.derive(0);
    std::vector<BitVec> rows(M);
    std::vector<std::string> question_ids(M);
    for (std::size_t j = 0; j < M; ++j) {
        BitVec row(K);
        do {
            for (std::size_t k = 0; k < K; ++k) row[k] = q_rng.bernoulli(spec.q_density);
        } while (all_zero(row));
        rows[j] = std::move(row);
        question_ids[j] = "q" + std::to_string(j);
    }
    data.q = make_qmatrix(std::move(rows), std::move(question_ids), synthetic_skill_ids(K));

    RandomSource profile_rng = root.derive(1);
    std::vector<std::string> student_ids(S);
    data.profiles.resize(S);
    for (std::size_t i = 0; i < S; ++i) {
        SkillProfile profile;
        profile.bits.resize(K);
        profile.determined.assign(K, 1);
        for (std::size_t k = 0; k < K; ++k) profile.bits[k] = profile_rng.bernoulli(spec.profile_density);
        data.profiles[i] = std::move(profile);
        student_ids[i] = "s" + std::to_string(i);
    }

    data.responses = ResponseMatrix(student_ids, data.q.question_ids);
    data.ideal.assign(S * M, 0);
    RandomSource response_rng = root.derive(2);
    for (std::size_t i = 0; i < S; ++i) {
        const int level = data.profiles[i].level();
        for (std::size_t j = 0; j < M; ++j) {
            const bool xi = dominates(data.profiles[i].bits, data.q.rows[j]);
            data.ideal[i * M + j] = xi;
            bool correct;
            if (xi) {
                correct = !response_rng.bernoulli(spec.slip.at(level));
            } else {
                int lacking = 0;
                for (std::size_t k = 0; k < K; ++k)
                    if (data.q.rows[j][k] && !data.profiles[i].bits[k]) ++lacking;
                correct = response_rng.bernoulli(spec.guess.at(lacking));
            }
            data.responses.set(i, j, correct ? Cell::Correct : Cell::Incorrect);
        }
    }

    if (spec.mask_rate > 0) {
        RandomSource mask_rng = root.derive(3);
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < M; ++j)
                if (mask_rng.bernoulli(spec.mask_rate)) data.responses.set(i, j, Cell::Unobserved);
        // Re-observe one cell wherever masking emptied a row or column.
        for (std::size_t i = 0; i < S; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < M; ++j) any = any || data.responses.at(i, j) != Cell::Unobserved;
            if (!any) {
                const std::size_t j = mask_rng.below(M);
                data.responses.set(i, j, data.ideal[i * M + j] ? Cell::Correct : Cell::Incorrect);
            }
        }
        for (std::size_t j = 0; j < M; ++j) {
            bool any = false;
            for (std::size_t i = 0; i < S; ++i) any = any || data.responses.at(i, j) != Cell::Unobserved;
            if (!any) {
                const std::size_t i = mask_rng.below(S);
                data.responses.set(i, j, data.ideal[i * M + j] ? Cell::Correct : Cell::Incorrect);
            }
        }
    }
    data.responses.validate();
    return data;
}

std::vector<BitVec> brute_force_feasible_profiles(const LabeledQuestionSets& sets,
                                                  std::size_t skill_count) {
    if (skill_count > 20) throw ConfigError("brute force enumeration is limited to K <= 20");
    std::vector<BitVec> feasible;
    const std::size_t total = std::size_t{1} << skill_count;
    for (std::size_t c = 0; c < total; ++c) {
        BitVec candidate(skill_count);
        for (std::size_t k = 0; k < skill_count; ++k) candidate[k] = (c >> k) & 1u;
        bool ok = true;
        for (const auto& right : sets.right) {
            bool covers = true;
            for (std::size_t k = 0; k < skill_count && covers; ++k)
                if (right.vector[k] && !candidate[k]) covers = false;
            if (!covers) {
                ok = false;
                break;
            }
        }
        for (const auto& wrong : sets.wrong) {
            if (!ok) break;
            bool covers = true;
            for (std::size_t k = 0; k < skill_count && covers; ++k)
                if (wrong.vector[k] && !candidate[k]) covers = false;
            if (covers) ok = false;
        }
        if (ok) feasible.push_back(std::move(candidate));
    }
    return feasible;
}

namespace {

std::string bits_to_string(const BitVec& bits) {
    std::string text;
    for (auto b : bits) text += b ? '1' : '0';
    return text;
}

}  // namespace

std::string truth_json(const GeneratedData& data, const GenerativeSpec& spec) {
    nlohmann::json doc;
    doc["spec"] = {{"students", spec.students},
                   {"questions", spec.questions},
                   {"skills", spec.skills},
                   {"q_density", spec.q_density},
                   {"profile_density", spec.profile_density},
                   {"slip", {{"base", spec.slip.base}, {"per_unit", spec.slip.per_unit}, {"cap", spec.slip.cap}}},
                   {"guess", {{"base", spec.guess.base}, {"per_unit", spec.guess.per_unit}, {"cap", spec.guess.cap}}},
                   {"mask_rate", spec.mask_rate},
                   {"seed", spec.seed}};
    auto& slip_by_level = doc["slip_by_level"];
    auto& guess_by_deficiency = doc["guess_by_deficiency"];
    for (std::size_t k = 0; k <= spec.skills; ++k) {
        slip_by_level.push_back(spec.slip.at(static_cast<int>(k)));
        guess_by_deficiency.push_back(spec.guess.at(static_cast<int>(k)));
    }
    auto& profiles = doc["profiles"];
    profiles = nlohmann::json::array();
    for (std::size_t i = 0; i < data.profiles.size(); ++i)
        profiles.push_back({{"student_id", data.responses.student_ids()[i]},
                            {"bits", bits_to_string(data.profiles[i].bits)}});
    auto& ideal = doc["ideal"];
    ideal = nlohmann::json::array();
    const std::size_t M = data.q.question_count();
    for (std::size_t i = 0; i < data.profiles.size(); ++i) {
        BitVec row(data.ideal.begin() + static_cast<std::ptrdiff_t>(i * M),
                   data.ideal.begin() + static_cast<std::ptrdiff_t>((i + 1) * M));
        ideal.push_back(bits_to_string(row));
    }
    return doc.dump(2) + "\n";
}

}  // namespace cogdiag
