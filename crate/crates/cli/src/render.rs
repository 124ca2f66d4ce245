//! ASCII snapshots of the service area.

use std::fmt::Write as _;

use aam_core::sim::World;

/// Something drawn in a grid cell, two characters wide.
#[derive(Clone, Debug, PartialEq)]
pub struct Mark {
    pub x: f64,
    pub y: f64,
    pub glyph: [char; 2],
}

const BLANK: [char; 2] = ['.', ' '];

/// Draws `marks` on a `size x size` grid, top row first. Later marks cover
/// earlier ones in the same cell.
pub fn render_grid(size: u32, marks: &[Mark]) -> String {
    let n = size as usize;
    let mut cells = vec![BLANK; n * n];
    for m in marks {
        let (col, row) = (m.x.floor() as usize, m.y.floor() as usize);
        if col < n && row < n {
            cells[row * n + col] = m.glyph;
        }
    }
    let mut out = String::with_capacity(n * (2 * n + 1));
    for row in (0..n).rev() {
        let line: String = cells[row * n..(row + 1) * n].iter().flatten().collect();
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn vehicle_glyph(id: usize) -> char {
    char::from_digit((id % 36) as u32, 36).unwrap_or('?')
}

/// Clients as `c`, depots as `D` plus queue length, vehicles as their id
/// followed by `*` when loaded, `>` when driving empty.
pub fn snapshot(world: &World) -> String {
    let mut marks: Vec<Mark> = world
        .clients
        .iter()
        .map(|p| Mark {
            x: p.x,
            y: p.y,
            glyph: ['c', ' '],
        })
        .collect();
    marks.extend(world.depots.iter().map(|d| Mark {
        x: d.position.x,
        y: d.position.y,
        glyph: ['D', char::from_digit(d.queue.len() as u32 % 10, 10).unwrap_or('+')],
    }));
    marks.extend(world.vehicles.iter().map(|v| {
        let state = match (&v.job, v.committed_payload()) {
            (_, Some(_)) => '*',
            (Some(_), None) => '>',
            (None, None) => ' ',
        };
        Mark {
            x: v.position.x,
            y: v.position.y,
            glyph: [vehicle_glyph(v.id), state],
        }
    }));

    let mut out = String::new();
    let _ = writeln!(
        out,
        "tick {}  fulfilled {}  fleet reward {:.2}  queued {}",
        world.clock,
        world.counters.fulfilled,
        world.fleet_reward(),
        world.queued_requests()
    );
    out.push_str(&render_grid(world.grid_size(), &marks));
    for v in &world.vehicles {
        let _ = writeln!(
            out,
            "  {} cap {} at ({:.1}, {:.1}) stop {} -> {}  reward {:.2}",
            vehicle_glyph(v.id),
            v.capacity,
            v.position.x,
            v.position.y,
            v.prev_stop,
            v.next_stop,
            world.counters.vehicle_rewards[v.id]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_blank() {
        assert_eq!(render_grid(4, &[]), ". . . .\n".repeat(4));
    }

    #[test]
    fn marks_land_in_their_cells() {
        let grid = render_grid(3, &[Mark { x: 0.5, y: 2.2, glyph: ['D', '3'] }, Mark { x: 2.0, y: 0.0, glyph: ['7', '*'] }]);
        assert_eq!(grid, "D3. .\n. . .\n. . 7*\n");
    }
}
