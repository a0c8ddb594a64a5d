// Drawing abstraction separating view logic from the canvas API, so
// rendering is testable without a browser: tests use RecordingSurface
// and assert on exactly which pixels were touched.

export interface DrawSurface {
  readonly width: number;
  readonly height: number;
  /** Fill the whole surface with a solid color. */
  clear(color: string): void;
  /** Blit a raw RGB block (w*h*3 bytes, row-major) at (x, y). */
  drawRGB(x: number, y: number, w: number, h: number, rgb: Uint8Array): void;
  /** Stroke a translucent overlay box. */
  drawBox(x: number, y: number, w: number, h: number, style: string): void;
  /** Flash a border outline around the surface. */
  drawOutline(style: string): void;
}

/**
 * Test double that records every operation and tracks the set of pixels
 * that ever received image data through drawRGB. clear() resets pixel
 * tracking (a cleared pixel shows background, not image data), which is
 * what the information-hiding assertions need.
 */
export class RecordingSurface implements DrawSurface {
  ops: string[] = [];
  private drawn = new Set<number>();

  constructor(public readonly width: number, public readonly height: number) {}

  clear(color: string): void {
    this.ops.push(`clear ${color}`);
    this.drawn.clear();
  }

  drawRGB(x: number, y: number, w: number, h: number, rgb: Uint8Array): void {
    if (rgb.length !== w * h * 3) {
      throw new Error(`RGB block ${w}x${h} needs ${w * h * 3} bytes, got ${rgb.length}`);
    }
    this.ops.push(`rgb ${x},${y} ${w}x${h}`);
    for (let dy = 0; dy < h; dy++) {
      for (let dx = 0; dx < w; dx++) {
        this.drawn.add((y + dy) * this.width + (x + dx));
      }
    }
  }

  drawBox(x: number, y: number, w: number, h: number, style: string): void {
    this.ops.push(`box ${x},${y} ${w}x${h} ${style}`);
  }

  drawOutline(style: string): void {
    this.ops.push(`outline ${style}`);
  }

  /** Pixels that currently show image data, as y*width+x indices. */
  drawnPixels(): Set<number> {
    return new Set(this.drawn);
  }
}

/** Canvas-backed surface for the real browser page. */
export class CanvasSurface implements DrawSurface {
  readonly width: number;
  readonly height: number;

  constructor(private ctx: CanvasRenderingContext2D) {
    this.width = ctx.canvas.width;
    this.height = ctx.canvas.height;
  }

  clear(color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(0, 0, this.width, this.height);
  }

  drawRGB(x: number, y: number, w: number, h: number, rgb: Uint8Array): void {
    const pixels = new Uint8ClampedArray(w * h * 4);
    for (let i = 0, j = 0; i < rgb.length; i += 3, j += 4) {
      pixels[j] = rgb[i];
      pixels[j + 1] = rgb[i + 1];
      pixels[j + 2] = rgb[i + 2];
      pixels[j + 3] = 255;
    }
    this.ctx.putImageData(new ImageData(pixels, w, h), x, y);
  }

  drawBox(x: number, y: number, w: number, h: number, style: string): void {
    this.ctx.fillStyle = style;
    this.ctx.fillRect(x, y, w, h);
  }

  drawOutline(style: string): void {
    this.ctx.strokeStyle = style;
    this.ctx.lineWidth = 6;
    this.ctx.strokeRect(3, 3, this.width - 6, this.height - 6);
  }
}
