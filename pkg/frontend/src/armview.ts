/**
 * Two fixed orthographic viewports of the arm (front and side), drawn as a
 * polyline through the link positions the server streams. The client does
 * no kinematics: it plots exactly the points it was given.
 */

export interface Viewport {
  label: string;
  /** world (x,y,z) in mm -> viewport (u,v) in mm, v up */
  project: (p: number[]) => [number, number];
}

export const FRONT_VIEW: Viewport = {
  label: "front",
  project: (p) => [p[0], p[2]],
};

export const SIDE_VIEW: Viewport = {
  label: "side",
  project: (p) => [p[1], p[2]],
};

const WORLD_HALF_WIDTH_MM = 450;
const WORLD_HEIGHT_MM = 520;

export class ArmView {
  private readonly svgs = new Map<string, SVGSVGElement>();
  private lastLinks: number[][] = [];

  constructor(
    readonly container: HTMLElement,
    readonly viewports: Viewport[] = [FRONT_VIEW, SIDE_VIEW],
  ) {
    const ns = "http://www.w3.org/2000/svg";
    for (const viewport of viewports) {
      const wrapper = document.createElement("figure");
      wrapper.className = "armview-viewport";
      const caption = document.createElement("figcaption");
      caption.textContent = viewport.label;
      const svg = document.createElementNS(ns, "svg") as SVGSVGElement;
      svg.setAttribute(
        "viewBox",
        `${-WORLD_HALF_WIDTH_MM} 0 ${2 * WORLD_HALF_WIDTH_MM} ${WORLD_HEIGHT_MM}`,
      );
      svg.setAttribute("data-viewport", viewport.label);
      wrapper.appendChild(svg);
      wrapper.appendChild(caption);
      container.appendChild(wrapper);
      this.svgs.set(viewport.label, svg);
    }
  }

  /** Redraw every viewport from server-provided link positions (mm). */
  render(linksMm: number[][]): void {
    this.lastLinks = linksMm;
    const ns = "http://www.w3.org/2000/svg";
    for (const viewport of this.viewports) {
      const svg = this.svgs.get(viewport.label)!;
      while (svg.firstChild) svg.removeChild(svg.firstChild);
      const points = linksMm.map((p) => {
        const [u, v] = viewport.project(p);
        return [u, WORLD_HEIGHT_MM - v] as [number, number];
      });
      const polyline = document.createElementNS(ns, "polyline");
      polyline.setAttribute(
        "points",
        points.map(([u, v]) => `${u},${v}`).join(" "),
      );
      polyline.setAttribute("class", "arm-links");
      polyline.setAttribute("fill", "none");
      svg.appendChild(polyline);
      // the end-effector is the arm's "face"; mark it
      const tip = points[points.length - 1];
      if (tip) {
        const dot = document.createElementNS(ns, "circle");
        dot.setAttribute("cx", String(tip[0]));
        dot.setAttribute("cy", String(tip[1]));
        dot.setAttribute("r", "12");
        dot.setAttribute("class", "arm-face");
        svg.appendChild(dot);
      }
    }
  }

  /** Segment endpoints most recently drawn, as world points per viewport. */
  renderedLinks(): number[][] {
    return this.lastLinks;
  }
}
