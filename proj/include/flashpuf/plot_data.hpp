#pragma once

#include <filesystem>
#include <span>

namespace flashpuf {

struct PlotDataFiles {
  std::filesystem::path temperature_fhw;       // temperature -> overall FHW
  std::filesystem::path temperature_page_fhw;  // (temperature, page) -> FHW
  std::filesystem::path voltage_fhw;           // (voltage, regulator) -> overall FHW
  std::filesystem::path voltage_intra_hd;      // (reference, voltage) -> intra-HD summary
};

// Turns report JSON files into four plot-ready CSV series. Temperature series
// use the reports at the reference supply setting, voltage series those at
// the reference temperature; the reference is the one the reports were
// analyzed against. Throws IoError if no report can be read.
PlotDataFiles emit_plot_data(std::span<const std::filesystem::path> report_files,
                             const std::filesystem::path& out_dir);

}  // namespace flashpuf
