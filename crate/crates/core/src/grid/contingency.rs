use super::{GridError, GridModel};

/// Copy of `grid` with one line taken out of service.
pub fn apply_contingency(grid: &GridModel, line_id: usize) -> Result<GridModel, GridError> {
    let line = grid
        .lines
        .get(line_id)
        .ok_or(GridError::UnknownLine(line_id))?;
    if !line.in_service {
        return Err(GridError::OutOfService(line_id));
    }
    if !grid.connected_without(Some(line_id)) {
        return Err(GridError::Islanding(line_id));
    }
    let mut out = grid.clone();
    out.lines[line_id].in_service = false;
    Ok(out)
}

/// Every in-service line whose outage keeps the network connected.
pub fn default_contingencies(grid: &GridModel) -> Vec<usize> {
    (0..grid.lines.len())
        .filter(|&id| grid.lines[id].in_service && grid.connected_without(Some(id)))
        .collect()
}
