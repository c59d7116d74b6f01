#pragma once

#include <string>
#include <vector>

#include "pulseforge/arb.hpp"
#include "pulseforge/dataset.hpp"
#include "pulseforge/mlp.hpp"
#include "pulseforge/spline.hpp"
#include "pulseforge/transmon.hpp"

namespace pulseforge {

// All numeric text uses 17 significant digits so artifacts round-trip
// bit-exactly and reruns diff clean.
std::string format_g17(double x);

// Coefficient vectors: 20-column CSV rows (re0..re9, im0..im9).
void save_coefficients_csv(const std::string& path,
                           const std::vector<PulseCoefficients>& rows);
std::vector<PulseCoefficients> load_coefficients_csv(const std::string& path);

// Raw optimizer output: angle, seed, c0..c19, fidelity, converged.
void append_raw_records(const std::string& path, const std::vector<RawRecord>& records,
                        bool write_header);
std::vector<RawRecord> load_raw_records(const std::string& path);

// Processed dataset: angle, c0..c{n-1}[, split].
void save_dataset_csv(const std::string& path, const AngleDataset& ds);
AngleDataset load_dataset_csv(const std::string& path);

void save_reduction_map(const std::string& path, const ReductionMap& map);
ReductionMap load_reduction_map(const std::string& path);

void save_model(const std::string& path, const MlpModel& model);
MlpModel load_model(const std::string& path);

// Unitaries: JSON with dim and row-major [re, im] entry pairs.
void save_unitary(const std::string& path, const GateUnitary& u);
GateUnitary load_unitary(const std::string& path);

// Loss curves: epoch, train_loss, val_loss (val column optional).
void save_loss_csv(const std::string& path, const std::vector<double>& train,
                   const std::vector<double>& val = {});

void save_arb_lengths_csv(const std::string& path, const ArbResult& result);
void save_arb_fit_json(const std::string& path, const ArbResult& result, const ArbConfig& cfg);
// Plot-ready fitted decay curve: m, fitted_p over a dense integer grid.
void save_arb_curve_csv(const std::string& path, const ArbResult& result);

std::string read_text_file(const std::string& path);

}  // namespace pulseforge
