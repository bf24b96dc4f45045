#pragma once

#include <optional>
#include <span>
#include <string>

#include "cogdiag/esve.hpp"
#include "cogdiag/types.hpp"

namespace cogdiag {

enum class SgMode { StudentIndependent, StudentDependent };

/// Raw tallies behind a rate; den == 0 marks an unpopulated bucket.
struct RateCell {
    double num = 0.0;
    double den = 0.0;

    bool defined() const { return den > 0.0; }
    double rate() const { return num / den; }
};

/// Per-question slip/guess rates, either scalar (SI) or bucketed by student
/// level / question deficiency (SD). Back-off order: SD bucket -> SI rate ->
/// global mean. Rates are reported raw; smoothing (default 0) shrinks a
/// bucket toward its back-off target.
struct SlipGuessTable {
    SgMode mode = SgMode::StudentIndependent;
    std::vector<RateCell> si_slip;                 // per question
    std::vector<RateCell> si_guess;                // per question
    std::vector<std::vector<RateCell>> sd_slip;    // [question][level 0..K]
    std::vector<std::vector<RateCell>> sd_guess;   // [question][deficiency 0..K]
    std::vector<double> question_train_mean;       // fallback for profile-less students
    double global_slip = 0.0;                      // mean of defined SI slip rates
    double global_guess = 0.0;
    double smoothing = 0.0;

    std::size_t question_count() const { return si_slip.size(); }
    std::size_t level_buckets() const { return sd_slip.empty() ? 0 : sd_slip.front().size(); }

    double si_slip_rate(std::size_t question) const;
    double si_guess_rate(std::size_t question) const;
    double slip_rate(std::size_t question, int level) const;
    double guess_rate(std::size_t question, int deficiency) const;
};

/// 1 iff the profile dominates the question vector (the student masters every
/// tested skill).
std::uint8_t ideal_response(const SkillProfile& profile, const BitVec& qvec);

/// Number of tested-but-unmastered skills.
int deficiency(const SkillProfile& profile, const BitVec& qvec);

/// SI rates: slip[j] = (#students with j filtered from their wrong set or
/// residually inconsistent) / (#students with j observed in training); guess
/// analogous with right-set filtering. Questions unobserved in training back
/// off to the global mean rate.
SlipGuessTable estimate_si(const std::vector<std::optional<EsveResult>>& esve_results,
                           const ResponseMatrix& responses, const QMatrix& q,
                           std::span<const CellRef> training_cells, double smoothing = 0.0);

/// SD rates: the SI tallies restricted per slip bucket to students at a given
/// level, and per guess bucket to students with a given deficiency on the
/// question. Includes the SI table for back-off.
SlipGuessTable estimate_sd(const std::vector<std::optional<EsveResult>>& esve_results,
                           const ResponseMatrix& responses, const QMatrix& q,
                           std::span<const CellRef> training_cells, double smoothing = 0.0);

/// P(correct) for one cell under the fitted table.
double predict_cell(const SkillProfile& profile, const BitVec& qvec, std::size_t question,
                    const SlipGuessTable& table);

struct PredictionBatch {
    std::vector<double> probability;          // aligned with the target cells
    std::vector<std::uint8_t> used_fallback;  // 1 where the student had no profile
    std::size_t fallback_count = 0;
};

/// Predicts every target cell; students without a profile fall back to the
/// question's training mean and are flagged.
PredictionBatch predict_all(const std::vector<std::optional<SkillProfile>>& profiles,
                            const QMatrix& q, const SlipGuessTable& table,
                            std::span<const CellRef> cells);

std::vector<std::optional<SkillProfile>> extract_profiles(
    const std::vector<std::optional<EsveResult>>& esve_results);

/// Fitted table as JSON, tallies included.
std::string slip_guess_table_json(const SlipGuessTable& table, const QMatrix& q);

/// Prediction CSV: `student_id,question_id,p_correct`.
std::string predictions_csv(const PredictionBatch& batch, const ResponseMatrix& responses,
                            std::span<const CellRef> cells);

}  // namespace cogdiag
