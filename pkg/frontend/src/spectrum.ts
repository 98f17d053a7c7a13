// Six-bar readout of the picked reference spectrum.

const BAND_LABELS = ["VIS R", "VIS G", "VIS B", "UVF R", "UVF G", "UVF B"];
const BAND_COLORS = ["#e05555", "#5fd05f", "#5f7fe0", "#b04040", "#3f9f4f", "#4055b0"];

export function renderSpectrum(container: HTMLElement, values: number[]): void {
  container.innerHTML = "";
  const peak = Math.max(...values, 1e-9);
  values.forEach((value, i) => {
    const bar = document.createElement("div");
    bar.className = "spectrum-bar";
    const fill = document.createElement("div");
    fill.className = "spectrum-fill";
    fill.style.height = `${Math.max((value / peak) * 100, 1)}%`;
    fill.style.background = BAND_COLORS[i % BAND_COLORS.length];
    const label = document.createElement("span");
    label.textContent = BAND_LABELS[i] ?? `B${i}`;
    const num = document.createElement("em");
    num.textContent = value.toFixed(3);
    bar.append(fill, num, label);
    container.appendChild(bar);
  });
}
