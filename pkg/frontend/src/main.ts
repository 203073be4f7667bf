/**
 * Browser annotation client.
 *
 * Wires the upload form, the drawing canvas (FG/BG brushes and the box tool
 * with a looseness slider), the mask overlay, the history rail, and the
 * co-segmentation panel to the session service. All masks come from the
 * service; the client only rasterizes strokes and renders what it receives.
 */

import { ApiClient, ApiError } from './api.js';
import type { AnnotationPayload } from './payload.js';
import { buildAnnotationPayload } from './payload.js';
import type { Box } from './raster.js';
import { dilateBbox, dragToBox } from './raster.js';
import type { OverlayBuffer, Rgb } from './rle.js';
import { decodeRle, maskArea, maskOverlay } from './rle.js';
import type { StoredMask } from './state.js';
import { SessionState } from './state.js';
import type { CosegScribble, HistoryEntry, Pixel } from './types.js';
import { rasterizeStrokes } from './raster.js';

export const DEFAULT_OPACITY = 0.45;
export const MASK_COLOR: Rgb = { r: 99, g: 102, b: 241 };
export const FG_STROKE = '#22c55e';
export const BG_STROKE = '#ef4444';

export interface AppOptions {
  base?: string;
  fetchFn?: (input: string, init?: RequestInit) => Promise<Response>;
  opacity?: number;
}

type Tool = 'fg' | 'bg' | 'box';

interface ImagePane {
  wrap: HTMLDivElement;
  image: HTMLCanvasElement;
  overlay: HTMLCanvasElement;
  dataUrl: string;
}

/** ImageData when the environment provides it, a structural stand-in otherwise. */
function toImageData(buffer: OverlayBuffer): ImageData {
  try {
    return new ImageData(buffer.data, buffer.width, buffer.height);
  } catch {
    return {
      data: buffer.data,
      width: buffer.width,
      height: buffer.height,
      colorSpace: 'srgb',
    } as unknown as ImageData;
  }
}

export class App {
  readonly state = new SessionState();
  readonly api: ApiClient;
  readonly opacity: number;

  private root: HTMLElement;
  private banner!: HTMLDivElement;
  private fileInput!: HTMLInputElement;
  private baseInput!: HTMLInputElement;
  private superpixelsInput!: HTMLInputElement;
  private sigmaInput!: HTMLInputElement;
  private startButton!: HTMLButtonElement;
  private toolButtons = new Map<Tool, HTMLButtonElement>();
  private radiusInput!: HTMLInputElement;
  private loosenessInput!: HTMLInputElement;
  private loosenessLabel!: HTMLSpanElement;
  private submitButton!: HTMLButtonElement;
  private clearButton!: HTMLButtonElement;
  private cosegButton!: HTMLButtonElement;
  private tabBar!: HTMLDivElement;
  private canvasHost!: HTMLDivElement;
  private historyList!: HTMLOListElement;
  private cosegPanel!: HTMLDivElement;

  private panes: ImagePane[] = [];
  private tool: Tool = 'fg';
  private drawing = false;
  private dragOrigin: [number, number] | null = null;
  private submitting = false;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.opacity = options.opacity ?? DEFAULT_OPACITY;
    const base = options.base ?? 'http://127.0.0.1:8008';
    this.api = new ApiClient(base, options.fetchFn);
    this.buildDom(base);
  }

  // ----- DOM scaffolding ---------------------------------------------------

  private buildDom(base: string): void {
    const doc = this.root.ownerDocument;
    const el = <K extends keyof HTMLElementTagNameMap>(
      tag: K,
      cls?: string,
      text?: string,
    ): HTMLElementTagNameMap[K] => {
      const node = doc.createElement(tag);
      if (cls) node.className = cls;
      if (text) node.textContent = text;
      return node;
    };

    const header = el('div', 'cds-header');
    this.baseInput = el('input', 'cds-base');
    this.baseInput.value = base;
    this.baseInput.id = 'service-url';
    this.fileInput = el('input', 'cds-files');
    this.fileInput.type = 'file';
    this.fileInput.accept = 'image/png';
    this.fileInput.multiple = true;
    this.fileInput.id = 'file-input';
    this.superpixelsInput = el('input', 'cds-superpixels');
    this.superpixelsInput.value = 'grid:200';
    this.sigmaInput = el('input', 'cds-sigma');
    this.sigmaInput.value = 'self';
    this.startButton = el('button', 'cds-start', 'start session');
    this.startButton.id = 'start-session';
    this.startButton.addEventListener('click', () => void this.startSession());
    header.append(
      this.labeled(el('span'), 'service', this.baseInput),
      this.labeled(el('span'), 'images', this.fileInput),
      this.labeled(el('span'), 'superpixels', this.superpixelsInput),
      this.labeled(el('span'), 'sigma', this.sigmaInput),
      this.startButton,
    );

    this.banner = el('div', 'cds-banner');
    this.banner.id = 'banner';

    const toolbar = el('div', 'cds-toolbar');
    for (const tool of ['fg', 'bg', 'box'] as Tool[]) {
      const button = el('button', 'cds-tool', tool === 'fg' ? 'FG brush' : tool === 'bg' ? 'BG brush' : 'box');
      button.id = `tool-${tool}`;
      button.addEventListener('click', () => this.setTool(tool));
      this.toolButtons.set(tool, button);
      toolbar.append(button);
    }
    this.radiusInput = el('input', 'cds-radius');
    this.radiusInput.type = 'number';
    this.radiusInput.min = '1';
    this.radiusInput.max = '16';
    this.radiusInput.value = '2';
    this.loosenessInput = el('input', 'cds-looseness');
    this.loosenessInput.type = 'range';
    this.loosenessInput.min = '0';
    this.loosenessInput.max = '600';
    this.loosenessInput.step = '10';
    this.loosenessInput.value = '0';
    this.loosenessInput.id = 'looseness';
    this.loosenessLabel = el('span', 'cds-looseness-label', '0%');
    this.loosenessInput.addEventListener('input', () => {
      this.state.looseness = Number(this.loosenessInput.value);
      this.loosenessLabel.textContent = `${this.state.looseness}%`;
      this.renderDraft();
    });
    this.submitButton = el('button', 'cds-submit', 'submit');
    this.submitButton.id = 'submit';
    this.submitButton.disabled = true;
    this.submitButton.addEventListener('click', () => void this.submit());
    this.clearButton = el('button', 'cds-clear', 'clear');
    this.clearButton.id = 'clear';
    this.clearButton.addEventListener('click', () => {
      this.state.clearDraft();
      this.renderDraft();
    });
    this.cosegButton = el('button', 'cds-coseg', 'run co-segmentation');
    this.cosegButton.id = 'run-coseg';
    this.cosegButton.disabled = true;
    this.cosegButton.addEventListener('click', () => void this.runCoseg());
    toolbar.append(
      this.labeled(el('span'), 'radius', this.radiusInput),
      this.labeled(el('span'), 'looseness', this.loosenessInput),
      this.loosenessLabel,
      this.submitButton,
      this.clearButton,
      this.cosegButton,
    );

    this.tabBar = el('div', 'cds-tabs');
    this.canvasHost = el('div', 'cds-canvas-host');
    const workspace = el('div', 'cds-workspace');
    workspace.append(this.tabBar, this.canvasHost);

    const historyBox = el('div', 'cds-history');
    historyBox.append(el('div', 'cds-history-title', 'history'));
    this.historyList = el('ol', 'cds-history-list');
    this.historyList.id = 'history';
    historyBox.append(this.historyList);

    this.cosegPanel = el('div', 'cds-coseg-panel');
    this.cosegPanel.id = 'coseg-panel';

    this.root.append(header, this.banner, toolbar, workspace, historyBox, this.cosegPanel);
    this.setTool('fg');
  }

  private labeled(host: HTMLElement, text: string, control: HTMLElement): HTMLElement {
    host.className = 'cds-field';
    const doc = this.root.ownerDocument;
    const label = doc.createElement('label');
    label.textContent = text;
    host.append(label, control);
    return host;
  }

  // ----- session lifecycle -------------------------------------------------

  async startSession(): Promise<void> {
    try {
      const files = Array.from(this.fileInput.files ?? []);
      if (files.length === 0) throw new Error('choose at least one PNG first');
      const images = await Promise.all(files.map((f) => fileToBase64(f)));
      const config = { superpixels: this.superpixelsInput.value, sigma: this.sigmaInput.value };
      const id = await this.api.createSession({ images, config });
      const view = await this.api.getSession(id);
      this.state.beginSession(id, view.image_shapes);
      this.buildPanes(images);
      this.submitButton.disabled = false;
      this.cosegButton.disabled = !view.coseg_capable;
      this.renderHistory();
      this.cosegPanel.replaceChildren();
      this.setStatus(`session ${id.slice(0, 8)}… with ${view.image_count} image(s)`);
    } catch (err) {
      this.showError(err);
    }
  }

  private buildPanes(images: string[]): void {
    const doc = this.root.ownerDocument;
    this.panes = [];
    this.tabBar.replaceChildren();
    this.canvasHost.replaceChildren();
    images.forEach((b64, index) => {
      const rows = this.state.heightOf(index);
      const cols = this.state.widthOf(index);
      const wrap = doc.createElement('div');
      wrap.className = 'cds-pane';
      const image = doc.createElement('canvas');
      image.width = cols;
      image.height = rows;
      const overlay = doc.createElement('canvas');
      overlay.width = cols;
      overlay.height = rows;
      overlay.className = 'cds-overlay';
      overlay.id = `overlay-${index}`;
      this.bindPointer(overlay, index);
      wrap.append(image, overlay);
      this.canvasHost.append(wrap);
      const dataUrl = `data:image/png;base64,${b64}`;
      this.panes.push({ wrap, image, overlay, dataUrl });
      this.paintImage(index);

      const tab = doc.createElement('button');
      tab.className = 'cds-tab';
      tab.id = `tab-${index}`;
      tab.textContent = `image ${index}`;
      tab.addEventListener('click', () => this.setActiveImage(index));
      this.tabBar.append(tab);
    });
    this.setActiveImage(0);
  }

  private paintImage(index: number): void {
    const pane = this.panes[index];
    const ctx = pane.image.getContext('2d');
    if (!ctx) return;
    const img = new Image();
    img.onload = () => ctx.drawImage(img, 0, 0);
    img.src = pane.dataUrl;
  }

  setActiveImage(index: number): void {
    this.state.activeImage = index;
    this.panes.forEach((pane, i) => {
      pane.wrap.style.display = i === index ? 'block' : 'none';
    });
    Array.from(this.tabBar.children).forEach((tab, i) => {
      (tab as HTMLElement).classList.toggle('active', i === index);
    });
    this.renderDraft();
  }

  setTool(tool: Tool): void {
    this.tool = tool;
    for (const [name, button] of this.toolButtons) {
      button.classList.toggle('active', name === tool);
    }
  }

  // ----- drawing -----------------------------------------------------------

  private bindPointer(canvas: HTMLCanvasElement, index: number): void {
    const position = (event: MouseEvent): [number, number] => {
      const rect = canvas.getBoundingClientRect();
      // headless layouts report a zero-size rect; fall back to 1:1 mapping
      const sx = rect.width > 0 ? canvas.width / rect.width : 1;
      const sy = rect.height > 0 ? canvas.height / rect.height : 1;
      return [(event.clientX - rect.left) * sx, (event.clientY - rect.top) * sy];
    };
    canvas.addEventListener('pointerdown', (event) => {
      const [x, y] = position(event as MouseEvent);
      this.beginGesture(index, x, y);
    });
    canvas.addEventListener('pointermove', (event) => {
      if (!this.drawing && !this.dragOrigin) return;
      const [x, y] = position(event as MouseEvent);
      this.extendGesture(index, x, y);
    });
    canvas.addEventListener('pointerup', (event) => {
      const [x, y] = position(event as MouseEvent);
      this.endGesture(index, x, y);
    });
  }

  /** Start a stroke or a box drag at image coordinates. */
  beginGesture(index: number, x: number, y: number): void {
    this.state.activeImage = index;
    const draft = this.state.draft(index);
    if (this.tool === 'box') {
      this.dragOrigin = [x, y];
      draft.box = dragToBox(x, y, x, y);
    } else {
      // starting a stroke abandons any pending box; the tools are exclusive
      draft.box = null;
      this.drawing = true;
      const radius = Math.max(1, Number(this.radiusInput.value) || 1);
      const list = this.tool === 'fg' ? draft.fgStrokes : draft.bgStrokes;
      list.push({ points: [[x, y]], radius });
    }
    this.renderDraft();
  }

  extendGesture(index: number, x: number, y: number): void {
    const draft = this.state.draft(index);
    if (this.dragOrigin) {
      draft.box = dragToBox(this.dragOrigin[0], this.dragOrigin[1], x, y);
    } else if (this.drawing) {
      const list = this.tool === 'fg' ? draft.fgStrokes : draft.bgStrokes;
      list[list.length - 1].points.push([x, y]);
    }
    this.renderDraft();
  }

  endGesture(index: number, x: number, y: number): void {
    if (this.dragOrigin) {
      const draft = this.state.draft(index);
      draft.box = dragToBox(this.dragOrigin[0], this.dragOrigin[1], x, y);
      // a box drag replaces strokes; box mode posts only corners
      draft.fgStrokes = [];
      draft.bgStrokes = [];
      this.dragOrigin = null;
    }
    this.drawing = false;
    this.renderDraft();
  }

  /** The exact body a submit would post right now (pure in the draft). */
  pendingPayload(): AnnotationPayload {
    const index = this.state.activeImage;
    const draft = this.state.draft(index);
    return buildAnnotationPayload({
      imageIndex: index,
      fgStrokes: draft.fgStrokes,
      bgStrokes: draft.bgStrokes,
      box: draft.box,
      looseness: this.state.looseness,
      width: this.state.widthOf(index),
      height: this.state.heightOf(index),
    });
  }

  // ----- service round trips -----------------------------------------------

  async submit(): Promise<void> {
    if (this.submitting || this.api.busy(this.state.sessionId)) return;
    let payload: AnnotationPayload;
    try {
      payload = this.pendingPayload();
    } catch (err) {
      this.showError(err);
      return;
    }
    this.submitting = true;
    this.submitButton.disabled = true;
    try {
      const response = await this.api.annotate(this.state.sessionId, payload);
      this.state.recordAnnotation(payload, response);
      this.renderMasks([
        { image: response.image_index, shape: response.shape, runs: response.mask_rle },
      ]);
      this.renderHistory();
      const area = maskArea(decodeRle(response.mask_rle, response.shape));
      this.setStatus(
        `${response.mode}: ${response.selected_regions.length} region(s), ${area} px`,
      );
    } catch (err) {
      this.showError(err);
    } finally {
      this.submitting = false;
      this.submitButton.disabled = false;
    }
  }

  async runCoseg(): Promise<void> {
    if (this.submitting || this.api.busy(this.state.sessionId)) return;
    const scribbles: CosegScribble[] = [];
    try {
      for (const image of this.state.scribbledImages()) {
        const draft = this.state.draft(image);
        const width = this.state.widthOf(image);
        const height = this.state.heightOf(image);
        const fg: Pixel[] = rasterizeStrokes(draft.fgStrokes, width, height);
        const bg: Pixel[] = rasterizeStrokes(draft.bgStrokes, width, height);
        if (fg.length === 0 || bg.length === 0) {
          throw new Error(
            `image ${image}: interactive co-segmentation needs both FG and BG strokes`,
          );
        }
        scribbles.push({ image, fg, bg });
      }
    } catch (err) {
      this.showError(err);
      return;
    }
    this.submitting = true;
    this.cosegButton.disabled = true;
    try {
      const response = await this.api.coseg(this.state.sessionId, scribbles);
      this.state.recordCoseg(response);
      this.renderCosegPanel(this.state.selectLatest());
      this.renderHistory();
      this.setStatus(`${response.mode}${response.empty ? ' (empty result)' : ''}`);
    } catch (err) {
      this.showError(err);
    } finally {
      this.submitting = false;
      this.cosegButton.disabled = false;
    }
  }

  // ----- rendering ---------------------------------------------------------

  private overlayContext(index: number): CanvasRenderingContext2D | null {
    const pane = this.panes[index];
    return pane ? pane.overlay.getContext('2d') : null;
  }

  /** Paint stored masks over their images (plus the coseg panel for sets). */
  renderMasks(masks: StoredMask[]): void {
    for (const mask of masks) {
      const ctx = this.overlayContext(mask.image);
      if (!ctx) continue;
      ctx.clearRect(0, 0, mask.shape[1], mask.shape[0]);
      const buffer = maskOverlay(decodeRle(mask.runs, mask.shape), mask.shape, MASK_COLOR, this.opacity);
      ctx.putImageData(toImageData(buffer), 0, 0);
    }
    if (masks.length > 1) this.renderCosegPanel(masks);
  }

  private renderCosegPanel(masks: StoredMask[]): void {
    const doc = this.root.ownerDocument;
    this.cosegPanel.replaceChildren();
    for (const mask of masks) {
      const cell = doc.createElement('div');
      cell.className = 'cds-coseg-cell';
      const canvas = doc.createElement('canvas');
      canvas.width = mask.shape[1];
      canvas.height = mask.shape[0];
      const ctx = canvas.getContext('2d');
      if (ctx) {
        const pane = this.panes[mask.image];
        if (pane) {
          const img = new Image();
          img.onload = () => {
            ctx.drawImage(img, 0, 0);
            ctx.putImageData(
              toImageData(
                maskOverlay(decodeRle(mask.runs, mask.shape), mask.shape, MASK_COLOR, this.opacity),
              ),
              0,
              0,
            );
          };
          img.src = pane.dataUrl;
        }
      }
      const label = doc.createElement('div');
      label.textContent = `image ${mask.image}`;
      cell.append(canvas, label);
      this.cosegPanel.append(cell);
    }
  }

  /** Strokes and box preview on the active overlay (transient draft state). */
  private renderDraft(): void {
    const index = this.state.activeImage;
    const ctx = this.overlayContext(index);
    if (!ctx) return;
    const draft = this.state.draft(index);
    ctx.clearRect(0, 0, this.state.widthOf(index), this.state.heightOf(index));
    for (const [strokes, color] of [
      [draft.fgStrokes, FG_STROKE],
      [draft.bgStrokes, BG_STROKE],
    ] as const) {
      ctx.strokeStyle = color;
      for (const stroke of strokes) {
        ctx.lineWidth = stroke.radius * 2;
        ctx.lineCap = 'round';
        ctx.lineJoin = 'round';
        ctx.beginPath();
        stroke.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
      }
    }
    if (draft.box) {
      this.strokeBox(ctx, draft.box, '#f59e0b', []);
      if (this.state.looseness > 0) {
        try {
          const preview = dilateBbox(
            draft.box,
            this.state.looseness,
            this.state.widthOf(index),
            this.state.heightOf(index),
          );
          this.strokeBox(ctx, preview, '#f59e0b', [4, 3]);
        } catch {
          // a degenerate preview is fine to skip; the server still validates
        }
      }
    }
  }

  private strokeBox(
    ctx: CanvasRenderingContext2D,
    box: Box,
    color: string,
    dash: number[],
  ): void {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    if (typeof ctx.setLineDash === 'function') ctx.setLineDash(dash);
    ctx.strokeRect(box.x0 + 0.5, box.y0 + 0.5, box.x1 - box.x0, box.y1 - box.y0);
    if (typeof ctx.setLineDash === 'function') ctx.setLineDash([]);
  }

  renderHistory(): void {
    const doc = this.root.ownerDocument;
    this.historyList.replaceChildren();
    const live = doc.createElement('li');
    const liveButton = doc.createElement('button');
    liveButton.textContent = 'live';
    liveButton.id = 'history-live';
    liveButton.addEventListener('click', () => {
      this.renderMasks(this.state.selectLatest());
      this.renderHistory();
    });
    live.append(liveButton);
    this.historyList.append(live);
    for (const entry of this.state.history) {
      const item = doc.createElement('li');
      const button = doc.createElement('button');
      button.id = `history-${entry.index}`;
      button.textContent = describeEntry(entry);
      button.classList.toggle('selected', this.state.selectedHistory === entry.index);
      button.addEventListener('click', () => {
        // local re-render of the stored mask; never re-solves
        this.renderMasks(this.state.selectHistory(entry.index));
        this.renderHistory();
      });
      item.append(button);
      this.historyList.append(item);
    }
  }

  // ----- status ------------------------------------------------------------

  setStatus(text: string): void {
    this.banner.textContent = text;
    this.banner.classList.remove('error');
  }

  showError(err: unknown): void {
    const text =
      err instanceof ApiError
        ? `service error: ${err.message}`
        : err instanceof Error
          ? err.message
          : String(err);
    this.banner.textContent = text;
    this.banner.classList.add('error');
  }
}

function describeEntry(entry: HistoryEntry): string {
  if (entry.kind === 'coseg') return `${entry.index}: ${entry.mode ?? 'coseg'}`;
  const regions = entry.selected_regions?.length ?? 0;
  return `${entry.index}: ${entry.mode ?? 'annotation'} on image ${entry.image_index ?? 0} (${regions} regions)`;
}

/** Strip the data-URL prefix; the service expects bare base64. */
export function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(new Error(`could not read ${file.name}`));
    reader.onload = () => {
      const url = String(reader.result);
      const comma = url.indexOf(',');
      resolve(comma >= 0 ? url.slice(comma + 1) : url);
    };
    reader.readAsDataURL(file);
  });
}

export function mount(root: HTMLElement, options?: AppOptions): App {
  return new App(root, options);
}

// browser entry point; tests mount explicitly
if (typeof document !== 'undefined') {
  const host = document.getElementById('app');
  if (host) mount(host);
}
