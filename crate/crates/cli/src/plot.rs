//! Gnuplot scripts that render the CSV written by a run.

use std::path::Path;

use crate::config::Subcommand;

/// Script for `subcommand` reading `csv`, or `None` if no figure is defined.
pub fn script(subcommand: Subcommand, csv: &Path) -> Option<String> {
    let data = csv.file_name()?.to_string_lossy().replace('\'', "''");
    let png = csv.with_extension("png");
    let png = png.file_name()?.to_string_lossy().replace('\'', "''");
    let header = format!(
        "# Run from the directory holding the CSV: gnuplot {stem}.gp\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,600\n\
         set output '{png}'\n",
        stem = csv.file_stem()?.to_string_lossy()
    );
    let body = match subcommand {
        Subcommand::Density => format!(
            "set xlabel 'eigenvalue'\n\
             set ylabel 'density'\n\
             plot '{data}' using (($1+$2)/2):4 with steps title 'empirical', \\\n\
             \x20    '{data}' using (($1+$2)/2):5 with lines lw 2 title 'semicircle'\n"
        ),
        Subcommand::Scaling => format!(
            "set xlabel 'N'\n\
             set ylabel 'Nb Var g(z)'\n\
             set logscale x\n\
             plot '{data}' using 1:7:8 with yerrorlines title 'Nb Var'\n"
        ),
        Subcommand::Correlation => format!(
            "set ylabel 'Re Nb C(z1, z2)'\n\
             set style data yerrorbars\n\
             set xtics rotate by -30\n\
             set offsets 0.5, 0.5, 0, 0\n\
             plot '{data}' using 0:6:8:xtic(1) title 'estimate (stderr)' pt 7\n"
        ),
        Subcommand::Exponent => format!(
            "set xlabel 'separation'\n\
             set ylabel '|Nb Xi|'\n\
             set logscale xy\n\
             plot '{data}' using 1:(abs($2)) with linespoints title 'Xi', \\\n\
             \x20    '{data}' using 1:(abs($3)) with lines title 'leading asymptote'\n"
        ),
        _ => return None,
    };
    Some(header + &body)
}
