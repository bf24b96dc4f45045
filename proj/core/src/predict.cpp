#include "cogdiag/predict.hpp"

#include <charconv>

#include <nlohmann/json.hpp>

#include "cogdiag/error.hpp"

namespace cogdiag {

namespace {

double smoothed(const RateCell& cell, double target, double smoothing) {
    return (cell.num + smoothing * target) / (cell.den + smoothing);
}

std::string format_double(double value) {
    char buffer[32];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, end);
}

}  // namespace

double SlipGuessTable::si_slip_rate(std::size_t question) const {
    const RateCell& cell = si_slip[question];
    return cell.defined() ? smoothed(cell, global_slip, smoothing) : global_slip;
}

double SlipGuessTable::si_guess_rate(std::size_t question) const {
    const RateCell& cell = si_guess[question];
    return cell.defined() ? smoothed(cell, global_guess, smoothing) : global_guess;
}

double SlipGuessTable::slip_rate(std::size_t question, int level) const {
    if (mode == SgMode::StudentDependent) {
        const RateCell& cell = sd_slip[question][static_cast<std::size_t>(level)];
        if (cell.defined()) return smoothed(cell, si_slip_rate(question), smoothing);
    }
    return si_slip_rate(question);
}

double SlipGuessTable::guess_rate(std::size_t question, int deficiency) const {
    if (mode == SgMode::StudentDependent) {
        const RateCell& cell = sd_guess[question][static_cast<std::size_t>(deficiency)];
        if (cell.defined()) return smoothed(cell, si_guess_rate(question), smoothing);
    }
    return si_guess_rate(question);
}

std::uint8_t ideal_response(const SkillProfile& profile, const BitVec& qvec) {
    if (profile.bits.size() != qvec.size())
        throw ValidationError("ideal_response: vector length mismatch");
    return dominates(profile.bits, qvec) ? 1 : 0;
}

int deficiency(const SkillProfile& profile, const BitVec& qvec) {
    if (profile.bits.size() != qvec.size())
        throw ValidationError("deficiency: vector length mismatch");
    int lacking = 0;
    for (std::size_t k = 0; k < qvec.size(); ++k)
        if (qvec[k] && !profile.bits[k]) ++lacking;
    return lacking;
}

namespace {

SlipGuessTable estimate(const std::vector<std::optional<EsveResult>>& esve_results,
                        const ResponseMatrix& responses, const QMatrix& q,
                        std::span<const CellRef> training_cells, double smoothing, SgMode mode) {
    const std::size_t M = q.question_count();
    const std::size_t buckets = q.skill_count() + 1;  // level/deficiency 0..K

    SlipGuessTable table;
    table.mode = mode;
    table.smoothing = smoothing;
    table.si_slip.assign(M, {});
    table.si_guess.assign(M, {});
    if (mode == SgMode::StudentDependent) {
        table.sd_slip.assign(M, std::vector<RateCell>(buckets));
        table.sd_guess.assign(M, std::vector<RateCell>(buckets));
    }
    table.question_train_mean.assign(M, 0.0);

    // Denominators: examinees of each question, bucketed by the student's
    // level (slips) and the pair's deficiency (guesses).
    std::vector<double> correct(M, 0.0);
    for (const auto& cell : training_cells) {
        const std::size_t j = cell.question;
        table.si_slip[j].den += 1;
        table.si_guess[j].den += 1;
        if (responses.at(cell.student, cell.question) == Cell::Correct) correct[j] += 1;
        if (mode == SgMode::StudentDependent && esve_results[cell.student]) {
            const auto& profile = esve_results[cell.student]->profile;
            table.sd_slip[j][static_cast<std::size_t>(profile.level())].den += 1;
            table.sd_guess[j][static_cast<std::size_t>(deficiency(profile, q.rows[j]))].den += 1;
        }
    }

    // Numerators: filtering outcomes per student.
    for (std::size_t i = 0; i < esve_results.size(); ++i) {
        if (!esve_results[i]) continue;
        const auto& result = *esve_results[i];
        const int level = result.profile.level();
        auto count_slip = [&](std::uint32_t j) {
            table.si_slip[j].num += 1;
            if (mode == SgMode::StudentDependent)
                table.sd_slip[j][static_cast<std::size_t>(level)].num += 1;
        };
        for (auto j : result.filtered_from_wrong) count_slip(j);
        for (auto j : result.residual_inconsistent_wrong) count_slip(j);
        for (auto j : result.filtered_from_right) {
            table.si_guess[j].num += 1;
            if (mode == SgMode::StudentDependent)
                table.sd_guess[j][static_cast<std::size_t>(deficiency(result.profile, q.rows[j]))].num += 1;
        }
    }

    double slip_sum = 0, guess_sum = 0, mean_sum = 0;
    std::size_t defined = 0;
    for (std::size_t j = 0; j < M; ++j) {
        if (!table.si_slip[j].defined()) continue;
        ++defined;
        slip_sum += table.si_slip[j].rate();
        guess_sum += table.si_guess[j].rate();
        mean_sum += correct[j] / table.si_slip[j].den;
    }
    if (defined > 0) {
        table.global_slip = slip_sum / static_cast<double>(defined);
        table.global_guess = guess_sum / static_cast<double>(defined);
        const double overall_mean = mean_sum / static_cast<double>(defined);
        for (std::size_t j = 0; j < M; ++j)
            table.question_train_mean[j] =
                table.si_slip[j].defined() ? correct[j] / table.si_slip[j].den : overall_mean;
    }
    return table;
}

}  // namespace

SlipGuessTable estimate_si(const std::vector<std::optional<EsveResult>>& esve_results,
                           const ResponseMatrix& responses, const QMatrix& q,
                           std::span<const CellRef> training_cells, double smoothing) {
    return estimate(esve_results, responses, q, training_cells, smoothing,
                    SgMode::StudentIndependent);
}

SlipGuessTable estimate_sd(const std::vector<std::optional<EsveResult>>& esve_results,
                           const ResponseMatrix& responses, const QMatrix& q,
                           std::span<const CellRef> training_cells, double smoothing) {
    return estimate(esve_results, responses, q, training_cells, smoothing,
                    SgMode::StudentDependent);
}

double predict_cell(const SkillProfile& profile, const BitVec& qvec, std::size_t question,
                    const SlipGuessTable& table) {
    if (ideal_response(profile, qvec))
        return 1.0 - table.slip_rate(question, profile.level());
    return table.guess_rate(question, deficiency(profile, qvec));
}

PredictionBatch predict_all(const std::vector<std::optional<SkillProfile>>& profiles,
                            const QMatrix& q, const SlipGuessTable& table,
                            std::span<const CellRef> cells) {
    PredictionBatch batch;
    batch.probability.reserve(cells.size());
    batch.used_fallback.reserve(cells.size());
    for (const auto& cell : cells) {
        if (profiles[cell.student]) {
            batch.probability.push_back(
                predict_cell(*profiles[cell.student], q.rows[cell.question], cell.question, table));
            batch.used_fallback.push_back(0);
        } else {
            batch.probability.push_back(table.question_train_mean[cell.question]);
            batch.used_fallback.push_back(1);
            ++batch.fallback_count;
        }
    }
    return batch;
}

std::vector<std::optional<SkillProfile>> extract_profiles(
    const std::vector<std::optional<EsveResult>>& esve_results) {
    std::vector<std::optional<SkillProfile>> profiles(esve_results.size());
    for (std::size_t i = 0; i < esve_results.size(); ++i)
        if (esve_results[i]) profiles[i] = esve_results[i]->profile;
    return profiles;
}

namespace {

nlohmann::json cell_json(const RateCell& cell) {
    nlohmann::json entry;
    entry["num"] = cell.num;
    entry["den"] = cell.den;
    if (cell.defined()) entry["rate"] = cell.rate();
    return entry;
}

}  // namespace

std::string slip_guess_table_json(const SlipGuessTable& table, const QMatrix& q) {
    nlohmann::json doc;
    doc["mode"] = table.mode == SgMode::StudentDependent ? "sd" : "si";
    doc["smoothing"] = table.smoothing;
    doc["global_slip"] = table.global_slip;
    doc["global_guess"] = table.global_guess;
    auto& questions = doc["questions"];
    questions = nlohmann::json::array();
    for (std::size_t j = 0; j < table.question_count(); ++j) {
        nlohmann::json entry;
        entry["question_id"] = q.question_ids[j];
        entry["slip"] = cell_json(table.si_slip[j]);
        entry["guess"] = cell_json(table.si_guess[j]);
        entry["train_mean"] = table.question_train_mean[j];
        if (table.mode == SgMode::StudentDependent) {
            auto& by_level = entry["slip_by_level"];
            by_level = nlohmann::json::array();
            for (const auto& cell : table.sd_slip[j]) by_level.push_back(cell_json(cell));
            auto& by_def = entry["guess_by_deficiency"];
            by_def = nlohmann::json::array();
            for (const auto& cell : table.sd_guess[j]) by_def.push_back(cell_json(cell));
        }
        questions.push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

std::string predictions_csv(const PredictionBatch& batch, const ResponseMatrix& responses,
                            std::span<const CellRef> cells) {
    std::string csv = "student_id,question_id,p_correct\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
        csv += responses.student_ids()[cells[c].student];
        csv += ',';
        csv += responses.question_ids()[cells[c].question];
        csv += ',';
        csv += format_double(batch.probability[c]);
        csv += '\n';
    }
    return csv;
}

}  // namespace cogdiag
