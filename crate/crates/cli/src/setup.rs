//! Carrier, grid and basis construction shared by the commands.

use std::path::Path;
use std::sync::Arc;

use deconv::sim::{carrier_library, CarrierSpec};
use deconv::{
    cyclic_kernel, make_grid, most_favorable, DensityVector, Grid, KernelMatrix, StatisticBasis,
};

use crate::args::{BasisArgs, BasisKind, CarrierArgs, CarrierKind, GridArgs};
use crate::error::{usage, CliError, CliResult};
use crate::output::Output;

/// `(mu, g)` pairs of a carrier file, sorted by `mu`.
pub struct CarrierTable(Vec<(f64, f64)>);

impl CarrierTable {
    pub fn read(path: &Path, out: &mut Output) -> CliResult<Self> {
        let bytes = out.read_input(path)?;
        let rows = read_numeric_csv(path, &bytes, &["mu", "g"])?;
        let mut pairs: Vec<(f64, f64)> = rows.into_iter().map(|r| (r[0], r[1])).collect();
        if pairs.len() < 2 {
            return Err(usage(format!("{}: need at least two rows", path.display())));
        }
        if pairs.iter().any(|&(_, g)| g < 0.0) {
            return Err(usage(format!("{}: carrier values must be nonnegative", path.display())));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self(pairs))
    }

    fn radius(&self) -> f64 {
        self.0.iter().map(|p| p.0.abs()).fold(0.0, f64::max)
    }

    fn on(&self, grid: &Grid) -> Vec<f64> {
        let t = &self.0;
        grid.points()
            .iter()
            .map(|&m| {
                if m < t[0].0 || m > t[t.len() - 1].0 {
                    return 0.0;
                }
                let k = t.partition_point(|p| p.0 <= m).clamp(1, t.len() - 1);
                let (a, b) = (t[k - 1], t[k]);
                if b.0 == a.0 {
                    a.1
                } else {
                    a.1 + (b.1 - a.1) * (m - a.0) / (b.0 - a.0)
                }
            })
            .collect()
    }
}

/// Parses a headed CSV of finite numbers with exactly the given columns.
pub fn read_numeric_csv(path: &Path, bytes: &[u8], columns: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let input_err = |line: usize, message: String| CliError::Input {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = reader
        .headers()
        .map_err(|e| input_err(1, e.to_string()))?
        .clone();
    let got: Vec<&str> = header.iter().collect();
    if got != columns {
        return Err(input_err(
            1,
            format!("expected header `{}`, found `{}`", columns.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            input_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(input_err(line, format!("`{field}` is not a finite number"))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(input_err(2, "no data rows".to_string()));
    }
    Ok(rows)
}

pub struct Carrier {
    spec: Option<CarrierSpec>,
    table: Option<CarrierTable>,
    pub floor: Option<f64>,
}

impl Carrier {
    pub fn from_args(args: &CarrierArgs, default: CarrierKind, out: &mut Output) -> CliResult<Self> {
        let kind = args.carrier.unwrap_or(default);
        let spec = match kind {
            CarrierKind::Uniform | CarrierKind::File => None,
            CarrierKind::Gaussian => Some(CarrierSpec::Gaussian { sigma: args.sigma }),
            CarrierKind::TwoTowers => Some(CarrierSpec::TwoTowers {
                variant: args.variant,
            }),
            CarrierKind::GaussSpike => Some(CarrierSpec::GaussSpike {
                location: args.location,
            }),
            CarrierKind::GeneMixture => Some(CarrierSpec::GeneMixture),
            CarrierKind::Bump => Some(CarrierSpec::Bump),
        };
        if kind == CarrierKind::Gaussian && !(args.sigma > 0.0) {
            return Err(usage(format!("--sigma must be positive, got {}", args.sigma)));
        }
        if kind == CarrierKind::TwoTowers && !matches!(args.variant, 1 | 2) {
            return Err(usage(format!("--variant must be 1 or 2, got {}", args.variant)));
        }
        let table = match (kind, &args.carrier_file) {
            (CarrierKind::File, Some(path)) => Some(CarrierTable::read(path, out)?),
            (CarrierKind::File, None) => return Err(usage("--carrier file needs --carrier-file")),
            _ => None,
        };
        if let Some(eps) = args.floor {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(usage(format!("--floor must lie in (0, 1), got {eps}")));
            }
        }
        out.resolve("carrier", kind);
        Ok(Self {
            spec,
            table,
            floor: args.floor,
        })
    }

    /// Natural scale of the carrier, used for the default domain and the
    /// Hermite basis.
    pub fn scale(&self) -> f64 {
        match self.spec {
            Some(CarrierSpec::Gaussian { sigma }) => sigma,
            _ => 1.0,
        }
    }

    /// `8 max(scale, 1)`, widened to cover a bounded support.
    pub fn default_half_width(&self) -> f64 {
        let base = 8.0 * self.scale().max(1.0);
        let support = match (&self.spec, &self.table) {
            (Some(spec), _) => spec.support_radius().unwrap_or(0.0),
            (None, Some(table)) => table.radius(),
            _ => 0.0,
        };
        base.max(support)
    }

    /// The carrier on `grid`, before any flooring.
    pub fn density(&self, grid: &Grid) -> CliResult<DensityVector> {
        let values = match (&self.spec, &self.table) {
            (Some(spec), _) => return Ok(carrier_library(spec, grid)?),
            (None, Some(table)) => table.on(grid),
            (None, None) => vec![1.0; grid.len()],
        };
        Ok(DensityVector::normalized(grid.clone(), values)?)
    }

    /// The carrier with the requested floor applied.
    pub fn floored_density(&self, grid: &Grid) -> CliResult<DensityVector> {
        let g = self.density(grid)?;
        Ok(match self.floor {
            Some(eps) => g.floored(eps)?,
            None => g,
        })
    }
}

pub struct Domain {
    pub grid: Grid,
    pub kernel: Arc<KernelMatrix>,
}

impl Domain {
    pub fn new(m_half: f64, grid_args: &GridArgs) -> CliResult<Self> {
        if grid_args.n_points == 0 {
            return Err(usage("--n-points must be positive"));
        }
        let grid = make_grid(m_half, grid_args.n_points)?;
        let kernel = Arc::new(cyclic_kernel(&grid, grid_args.wrap_terms)?);
        Ok(Self { grid, kernel })
    }
}

/// The requested basis; `carrier` is the (floored) carrier the favorable
/// statistics are computed from.
pub fn build_basis(
    args: &BasisArgs,
    carrier: &Carrier,
    density: &DensityVector,
    domain: &Domain,
) -> CliResult<StatisticBasis> {
    if args.p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    let grid = domain.grid.clone();
    Ok(match args.basis {
        BasisKind::Poly => StatisticBasis::polynomial(grid, args.p)?,
        BasisKind::Hermite => {
            let scale = args.hermite_scale.unwrap_or_else(|| carrier.scale());
            StatisticBasis::hermite(grid, args.p, scale)?
        }
        BasisKind::Favorable => {
            most_favorable(density, &domain.kernel, args.p, None)?.favorable_basis(args.p)?
        }
    })
}
