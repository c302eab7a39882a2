//! Chain files: a little-endian binary of draw columns plus a JSON sidecar
//! at `<path>.json` holding parameter names, configuration and the model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Chain, Imputations, McmcConfig, ParamDesc, UnitAcceptance};

const MAGIC: &[u8; 8] = b"HNCHAIN1";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ChainIoError {
    #[error("chain file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("chain sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a chain file: {0}")]
    Format(String),
}

/// Contents of the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub params: Vec<ParamDesc>,
    pub imputation_cells: Option<Vec<(usize, usize)>>,
    pub config: McmcConfig,
    pub seed: u64,
    pub chain_index: u32,
    pub acceptance: Vec<UnitAcceptance>,
    pub n_draws: usize,
    /// Model text the chain was fitted against.
    pub model: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_chain(path: impl AsRef<Path>, chain: &Chain, model_text: &str) -> Result<(), ChainIoError> {
    let path = path.as_ref();
    let n_draws = chain.n_draws();
    let imp_cols = chain.imputations.as_ref().map_or(&[][..], |i| i.draws.as_slice());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(chain.draws.len() as u64).to_le_bytes())?;
    w.write_all(&(n_draws as u64).to_le_bytes())?;
    w.write_all(&(imp_cols.len() as u64).to_le_bytes())?;
    for col in chain.draws.iter().chain(imp_cols) {
        if col.len() != n_draws {
            return Err(ChainIoError::Format("ragged draw columns".into()));
        }
        for v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;

    let header = ChainHeader {
        params: chain.params.clone(),
        imputation_cells: chain.imputations.as_ref().map(|i| i.cells.clone()),
        config: chain.config.clone(),
        seed: chain.seed,
        chain_index: chain.chain_index,
        acceptance: chain.acceptance.clone(),
        n_draws,
        model: model_text.to_string(),
    };
    let f = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(f, &header)?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64, ChainIoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a chain and the model text stored with it.
pub fn read_chain(path: impl AsRef<Path>) -> Result<(Chain, String), ChainIoError> {
    let path = path.as_ref();
    let header: ChainHeader = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ChainIoError::Format("bad magic".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    if u32::from_le_bytes(vb) != VERSION {
        return Err(ChainIoError::Format(format!("unsupported version {}", u32::from_le_bytes(vb))));
    }
    let n_params = read_u64(&mut r)? as usize;
    let n_draws = read_u64(&mut r)? as usize;
    let n_imp = read_u64(&mut r)? as usize;
    let n_cells = header.imputation_cells.as_ref().map_or(0, Vec::len);
    if n_params != header.params.len() || n_draws != header.n_draws || n_imp != n_cells {
        return Err(ChainIoError::Format("binary and sidecar disagree".into()));
    }
    let read_col = |r: &mut BufReader<File>| -> Result<Vec<f64>, ChainIoError> {
        let mut bytes = vec![0u8; n_draws * 8];
        r.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let draws = (0..n_params).map(|_| read_col(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let imp = (0..n_imp).map(|_| read_col(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let chain = Chain {
        params: header.params,
        draws,
        imputations: header.imputation_cells.map(|cells| Imputations { cells, draws: imp }),
        acceptance: header.acceptance,
        config: header.config,
        seed: header.seed,
        chain_index: header.chain_index,
    };
    Ok((chain, header.model))
}
