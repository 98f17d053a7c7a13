// Three.js scene: textured mesh, orbit navigation, overlay as a second
// draw of the same geometry, and pointer events turned into world-space
// rays for the service to resolve (the viewer never raycasts itself).

import * as THREE from "three";
import { OBJLoader } from "three/examples/jsm/loaders/OBJLoader.js";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import type { RayRef } from "./api";
import { maskToRGBA } from "./overlay";

export class ModelScene {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private baseMaterial = new THREE.MeshBasicMaterial({ color: 0x888888 });
  private overlayMaterial: THREE.MeshBasicMaterial;
  private overlayTexture: THREE.DataTexture | null = null;
  private meshGroup: THREE.Group | null = null;
  private raycaster = new THREE.Raycaster();

  constructor(private canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.001, 100);
    this.camera.position.set(0.5, 0.5, 2.0);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0.4, 0.5, 0);
    this.scene.background = new THREE.Color(0x202228);
    this.overlayMaterial = new THREE.MeshBasicMaterial({
      transparent: true,
      depthWrite: false,
      polygonOffset: true,
      polygonOffsetFactor: -2,
      polygonOffsetUnits: -2,
      visible: false,
    });
    const loop = () => {
      this.resize();
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  private resize() {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.renderer.setSize(w, h, false);
      this.camera.aspect = w / Math.max(h, 1);
      this.camera.updateProjectionMatrix();
    }
  }

  loadMesh(objText: string): void {
    const group = new OBJLoader().parse(objText);
    group.traverse((child) => {
      if (child instanceof THREE.Mesh) {
        child.material = this.baseMaterial;
        const overlay = new THREE.Mesh(child.geometry, this.overlayMaterial);
        child.add(overlay);
      }
    });
    if (this.meshGroup) this.scene.remove(this.meshGroup);
    this.meshGroup = group;
    this.scene.add(group);
    const box = new THREE.Box3().setFromObject(group);
    const center = box.getCenter(new THREE.Vector3());
    const size = box.getSize(new THREE.Vector3()).length() || 1;
    this.controls.target.copy(center);
    this.camera.position.copy(center).add(new THREE.Vector3(0, 0, size * 1.5));
    this.camera.near = size / 1000;
    this.camera.far = size * 100;
    this.camera.updateProjectionMatrix();
  }

  setBaseTexture(url: string): void {
    new THREE.TextureLoader().load(url, (tex) => {
      tex.colorSpace = THREE.SRGBColorSpace;
      this.baseMaterial.map = tex;
      this.baseMaterial.color.set(0xffffff);
      this.baseMaterial.needsUpdate = true;
    });
  }

  /** Convert a pointer event into a world-space ray through the camera. */
  pointerRay(event: { clientX: number; clientY: number }): RayRef {
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    const o = this.raycaster.ray.origin;
    const d = this.raycaster.ray.direction;
    return { origin: [o.x, o.y, o.z], direction: [d.x, d.y, d.z] };
  }

  setOverlay(
    mask: Uint8Array,
    width: number,
    height: number,
    color: [number, number, number],
    opacity: number,
  ): void {
    const rgba = maskToRGBA(mask, width, height, color, opacity, true);
    if (
      !this.overlayTexture ||
      this.overlayTexture.image.width !== width ||
      this.overlayTexture.image.height !== height
    ) {
      this.overlayTexture?.dispose();
      this.overlayTexture = new THREE.DataTexture(
        rgba,
        width,
        height,
        THREE.RGBAFormat,
      );
      this.overlayMaterial.map = this.overlayTexture;
    } else {
      (this.overlayTexture.image.data as Uint8Array).set(rgba);
    }
    this.overlayTexture!.needsUpdate = true;
    this.overlayMaterial.needsUpdate = true;
  }

  setOverlayVisible(visible: boolean): void {
    this.overlayMaterial.visible = visible;
  }
}
